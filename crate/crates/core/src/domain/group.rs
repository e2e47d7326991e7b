use std::fmt;

use crate::domain::dataset::{ColumnKind, FeatureRow, Schema, Value};
use crate::error::{Error, Result};

/// Name of the predicate that matches every row.
pub const ALL: &str = "ALL";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparator {
    Eq,
    Ne,
    Le,
    Gt,
}

impl Comparator {
    fn symbol(self) -> &'static str {
        match self {
            Comparator::Eq => "==",
            Comparator::Ne => "!=",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
        }
    }
}

/// `column <op> value`, resolved against a schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub column: String,
    index: usize,
    pub op: Comparator,
    pub value: Value,
}

impl Atom {
    pub fn new(schema: &Schema, column: &str, op: Comparator, literal: &str) -> Result<Self> {
        let index = schema.index_of(column)?;
        let value = match &schema.columns[index].kind {
            ColumnKind::Numeric => {
                let x: f64 = literal.trim().parse().map_err(|_| {
                    Error::Schema(format!("column `{column}` is numeric but `{literal}` is not a number"))
                })?;
                Value::Num(x)
            }
            ColumnKind::Categorical { .. } => {
                if matches!(op, Comparator::Le | Comparator::Gt) {
                    return Err(Error::Schema(format!(
                        "ordering comparator `{}` used on categorical column `{column}`",
                        op.symbol()
                    )));
                }
                Value::Cat(literal.trim().to_string())
            }
        };
        Ok(Atom { column: column.to_string(), index, op, value })
    }

    #[inline]
    fn test(&self, row: &FeatureRow) -> bool {
        let cell = &row.values[self.index];
        match (&self.value, cell) {
            (Value::Num(v), Value::Num(x)) => match self.op {
                Comparator::Eq => x == v,
                Comparator::Ne => x != v,
                Comparator::Le => x <= v,
                Comparator::Gt => x > v,
            },
            (Value::Cat(v), Value::Cat(x)) => match self.op {
                Comparator::Eq => x == v,
                Comparator::Ne => x != v,
                Comparator::Le | Comparator::Gt => false,
            },
            _ => false,
        }
    }
}

/// A named conjunction of atoms. An empty conjunction matches everything.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPredicate {
    pub name: String,
    atoms: Vec<Atom>,
}

impl GroupPredicate {
    pub fn all() -> Self {
        GroupPredicate { name: ALL.to_string(), atoms: Vec::new() }
    }

    pub fn new(name: impl Into<String>, atoms: Vec<Atom>) -> Self {
        GroupPredicate { name: name.into(), atoms }
    }

    /// Builds a predicate from `(column, comparator, literal)` triples.
    pub fn from_clauses(schema: &Schema, name: impl Into<String>, clauses: &[(&str, Comparator, &str)]) -> Result<Self> {
        let atoms = clauses
            .iter()
            .map(|(col, op, lit)| Atom::new(schema, col, *op, lit))
            .collect::<Result<Vec<_>>>()?;
        Ok(GroupPredicate::new(name, atoms))
    }

    /// Parses `name: col==val & col2<=num`. A body of `ALL` (or `*`) matches every row;
    /// the bare text `ALL` is accepted as well.
    pub fn parse(text: &str, schema: &Schema) -> Result<Self> {
        let text = text.trim();
        if text == ALL {
            return Ok(GroupPredicate::all());
        }
        let (name, body) = text
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("group definition `{text}` is missing `name:`")))?;
        let name = name.trim();
        if name.is_empty() {
            return Err(Error::Config(format!("group definition `{text}` has an empty name")));
        }
        let body = body.trim();
        if body == ALL || body == "*" {
            return Ok(GroupPredicate { name: name.to_string(), atoms: Vec::new() });
        }
        let mut atoms = Vec::new();
        for clause in body.split('&') {
            let clause = clause.trim();
            let (col, op, lit) = split_clause(clause)
                .ok_or_else(|| Error::Config(format!("cannot parse clause `{clause}` in `{text}`")))?;
            atoms.push(Atom::new(schema, col.trim(), op, lit)?);
        }
        Ok(GroupPredicate { name: name.to_string(), atoms })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn is_all(&self) -> bool {
        self.atoms.is_empty()
    }

    #[inline]
    pub fn contains(&self, row: &FeatureRow) -> bool {
        self.atoms.iter().all(|a| a.test(row))
    }

    /// Membership bit per row.
    pub fn membership(&self, rows: &[FeatureRow]) -> Vec<bool> {
        rows.iter().map(|r| self.contains(r)).collect()
    }

    pub fn member_indices(&self, rows: &[FeatureRow]) -> Vec<usize> {
        rows.iter().enumerate().filter(|(_, r)| self.contains(r)).map(|(i, _)| i).collect()
    }
}

fn split_clause(clause: &str) -> Option<(&str, Comparator, &str)> {
    for (sym, op) in [("==", Comparator::Eq), ("!=", Comparator::Ne), ("<=", Comparator::Le), (">", Comparator::Gt)] {
        if let Some(pos) = clause.find(sym) {
            let col = &clause[..pos];
            let lit = &clause[pos + sym.len()..];
            if col.trim().is_empty() || lit.trim().is_empty() {
                return None;
            }
            return Some((col, op, lit));
        }
    }
    None
}

impl fmt::Display for GroupPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.name)?;
        if self.atoms.is_empty() {
            return f.write_str(ALL);
        }
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(" & ")?;
            }
            write!(f, "{}{}{}", a.column, a.op.symbol(), a.value)?;
        }
        Ok(())
    }
}

/// Ordered collection of groups with unique names. `ALL` is always present,
/// appended last unless the caller supplied it.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupClass {
    groups: Vec<GroupPredicate>,
}

impl GroupClass {
    pub fn new(mut groups: Vec<GroupPredicate>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for g in &groups {
            if !seen.insert(g.name.clone()) {
                return Err(Error::Config(format!("duplicate group name `{}`", g.name)));
            }
        }
        if !groups.iter().any(|g| g.is_all()) {
            if seen.contains(ALL) {
                return Err(Error::Config(format!("group `{ALL}` is reserved for the match-all predicate")));
            }
            groups.push(GroupPredicate::all());
        }
        Ok(GroupClass { groups })
    }

    pub fn parse<S: AsRef<str>>(defs: &[S], schema: &Schema) -> Result<Self> {
        let groups = defs
            .iter()
            .map(|d| GroupPredicate::parse(d.as_ref(), schema))
            .collect::<Result<Vec<_>>>()?;
        GroupClass::new(groups)
    }

    pub fn groups(&self) -> &[GroupPredicate] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&GroupPredicate> {
        self.groups.iter().find(|g| g.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&GroupPredicate> {
        self.get(name).ok_or_else(|| Error::Config(format!("unknown group `{name}`")))
    }

    pub fn iter(&self) -> impl Iterator<Item = &GroupPredicate> {
        self.groups.iter()
    }

    /// Row indices of each group, in group order.
    pub fn member_indices(&self, rows: &[FeatureRow]) -> Vec<Vec<usize>> {
        self.groups.iter().map(|g| g.member_indices(rows)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::dataset::Column;

    fn schema() -> Schema {
        Schema::new(
            vec![Column::categorical("sex", ["F", "M"]), Column::categorical("race", ["W", "B"]), Column::numeric("age")],
            "y",
        )
        .unwrap()
    }

    fn row(sex: &str, race: &str, age: f64) -> FeatureRow {
        FeatureRow::new(vec![Value::Cat(sex.into()), Value::Cat(race.into()), Value::Num(age)])
    }

    #[test]
    fn all_matches_everything() {
        let rows = vec![row("F", "W", 1.0), row("M", "B", 2.0), row("F", "B", 3.0)];
        assert_eq!(GroupPredicate::all().membership(&rows), vec![true, true, true]);
    }

    #[test]
    fn single_and_conjunctive_clauses() {
        let s = schema();
        let rows = vec![row("F", "W", 30.0), row("M", "W", 40.0), row("F", "B", 50.0)];
        let f = GroupPredicate::parse("female: sex==F", &s).unwrap();
        assert_eq!(f.membership(&rows), vec![true, false, true]);
        let fw = GroupPredicate::parse("fw: sex==F & race==W", &s).unwrap();
        assert_eq!(fw.membership(&rows[..1]), vec![true]);
        assert_eq!(fw.membership(&[row("F", "W", 1.0), row("F", "B", 1.0)]), vec![true, false]);
    }

    #[test]
    fn numeric_comparators() {
        let s = schema();
        let rows = vec![row("F", "W", 30.0), row("M", "W", 40.0), row("F", "B", 50.0)];
        let le = GroupPredicate::parse("young: age<=40", &s).unwrap();
        assert_eq!(le.membership(&rows), vec![true, true, false]);
        let gt = GroupPredicate::parse("old: age>40", &s).unwrap();
        assert_eq!(gt.membership(&rows), vec![false, false, true]);
        let ne = GroupPredicate::parse("not40: age!=40 & sex!=M", &s).unwrap();
        assert_eq!(ne.membership(&rows), vec![true, false, true]);
    }

    #[test]
    fn unseen_tokens_are_evaluable() {
        let s = schema();
        let g = GroupPredicate::parse("f: sex==F", &s).unwrap();
        assert!(!g.contains(&row("X", "W", 1.0)));
        let ne = GroupPredicate::parse("nf: sex!=F", &s).unwrap();
        assert!(ne.contains(&row("X", "W", 1.0)));
    }

    #[test]
    fn unknown_column_is_a_schema_error() {
        let err = GroupPredicate::parse("g: height==3", &schema()).unwrap_err();
        assert!(matches!(err, Error::Schema(_)), "{err}");
    }

    #[test]
    fn ordering_on_categorical_rejected() {
        assert!(GroupPredicate::parse("g: sex<=F", &schema()).is_err());
        assert!(GroupPredicate::parse("g: age==abc", &schema()).is_err());
        assert!(GroupPredicate::parse("nocolon", &schema()).is_err());
    }

    #[test]
    fn class_appends_all_and_rejects_duplicates() {
        let s = schema();
        let gc = GroupClass::parse(&["a: sex==F", "b: sex==M"], &s).unwrap();
        assert_eq!(gc.len(), 3);
        assert_eq!(gc.groups()[2].name, ALL);
        let gc = GroupClass::parse(&["ALL", "a: sex==F"], &s).unwrap();
        assert_eq!(gc.len(), 2);
        assert_eq!(gc.groups()[0].name, ALL);
        assert!(GroupClass::parse(&["a: sex==F", "a: sex==M"], &s).is_err());
    }

    #[test]
    fn display_round_trips() {
        let s = schema();
        let g = GroupPredicate::parse("x: sex==F & age<=3", &s).unwrap();
        let again = GroupPredicate::parse(&g.to_string(), &s).unwrap();
        assert_eq!(g, again);
    }
}
