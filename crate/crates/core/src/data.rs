//! Schemas, facts with provenance, and databases.
//!
//! A database is a set of facts partitioned into exogenous context (`D_x`)
//! and endogenous facts (`D_n`). Endogenous facts are the players of every
//! attribution game and carry stable indices `0..m` assigned in load order
//! (manifest relation order, then CSV row order).

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A database value. Equality is exact: `Int(1)` and `Str("1")` differ.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Constant {
    Int(i64),
    Str(String),
}

impl Constant {
    /// CSV sniffing: pure digits with an optional leading `-` become an
    /// integer, everything else stays a string. Digit runs that overflow
    /// `i64` stay strings, which keeps sniffing idempotent.
    pub fn sniff(cell: &str) -> Constant {
        let body = cell.strip_prefix('-').unwrap_or(cell);
        if !body.is_empty() && body.bytes().all(|b| b.is_ascii_digit()) {
            if let Ok(n) = cell.parse::<i64>() {
                return Constant::Int(n);
            }
        }
        Constant::Str(cell.to_string())
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Constant::Int(n) => Some(*n),
            Constant::Str(_) => None,
        }
    }

    /// The raw cell text this constant round-trips through CSV as.
    pub fn to_cell(&self) -> String {
        match self {
            Constant::Int(n) => n.to_string(),
            Constant::Str(s) => s.clone(),
        }
    }
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constant::Int(n) => write!(f, "{n}"),
            Constant::Str(s) => {
                if s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') && !s.is_empty() {
                    write!(f, "{s}")
                } else {
                    write!(f, "'{s}'")
                }
            }
        }
    }
}

impl From<i64> for Constant {
    fn from(n: i64) -> Self {
        Constant::Int(n)
    }
}
impl From<i32> for Constant {
    fn from(n: i32) -> Self {
        Constant::Int(n as i64)
    }
}
impl From<&str> for Constant {
    fn from(s: &str) -> Self {
        Constant::Str(s.to_string())
    }
}
impl From<String> for Constant {
    fn from(s: String) -> Self {
        Constant::Str(s)
    }
}

/// Builds a `Vec<Constant>` from mixed literals: `tuple!["Alice", 18]`.
#[macro_export]
macro_rules! tuple {
    ($($x:expr),* $(,)?) => { vec![$($crate::data::Constant::from($x)),*] };
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Endogenous,
    Exogenous,
}

/// Index of a fact within `D_n`. Handles are only meaningful for the
/// database that issued them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FactHandle(pub(crate) usize);

impl FactHandle {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for FactHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Row {
    tuple: Vec<Constant>,
    provenance: Provenance,
    endo_index: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relation {
    name: String,
    arity: usize,
    rows: Vec<Row>,
}

impl Relation {
    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn arity(&self) -> usize {
        self.arity
    }
    pub fn len(&self) -> usize {
        self.rows.len()
    }
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Iterates `(tuple, provenance, endo_index)` in load order.
    pub fn facts(&self) -> impl Iterator<Item = (&[Constant], Provenance, Option<usize>)> {
        self.rows
            .iter()
            .map(|r| (r.tuple.as_slice(), r.provenance, r.endo_index))
    }
}

/// A fully-qualified fact, used for display and lookups.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fact {
    pub relation: String,
    pub tuple: Vec<Constant>,
    pub provenance: Provenance,
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.relation)?;
        for (i, c) in self.tuple.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Presence mask over `D_n`; engines evaluate queries on `D_x ∪ masked D_n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EndoMask {
    bits: Vec<bool>,
}

impl EndoMask {
    pub fn empty(m: usize) -> Self {
        EndoMask {
            bits: vec![false; m],
        }
    }
    pub fn full(m: usize) -> Self {
        EndoMask {
            bits: vec![true; m],
        }
    }
    pub fn contains(&self, idx: usize) -> bool {
        self.bits.get(idx).copied().unwrap_or(false)
    }
    pub fn set(&mut self, idx: usize, present: bool) {
        self.bits[idx] = present;
    }
    pub fn len(&self) -> usize {
        self.bits.len()
    }
    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }
    pub fn is_subset_of(&self, other: &EndoMask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b)
    }
}

/// Immutable store `D = D_x ∪ D_n`. Safe to share across threads once built.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Database {
    relations: Vec<Relation>,
    by_name: HashMap<String, usize>,
    endo: Vec<(usize, usize)>, // (relation idx, row idx) in D_n order
}

impl Database {
    pub fn builder() -> DatabaseBuilder {
        DatabaseBuilder::default()
    }

    /// `m = |D_n|`, stable for the lifetime of this value.
    pub fn endo_count(&self) -> usize {
        self.endo.len()
    }

    pub fn exo_count(&self) -> usize {
        self.relations
            .iter()
            .map(|r| {
                r.rows
                    .iter()
                    .filter(|row| row.provenance == Provenance::Exogenous)
                    .count()
            })
            .sum()
    }

    pub fn relations(&self) -> impl Iterator<Item = &Relation> {
        self.relations.iter()
    }

    pub fn relation(&self, name: &str) -> Option<&Relation> {
        self.by_name.get(name).map(|&i| &self.relations[i])
    }

    pub fn endo_handles(&self) -> impl Iterator<Item = FactHandle> {
        (0..self.endo.len()).map(FactHandle)
    }

    /// The fact behind an endogenous handle.
    pub fn endo_fact(&self, handle: FactHandle) -> Fact {
        let (rel, row) = self.endo[handle.0];
        let r = &self.relations[rel];
        Fact {
            relation: r.name.clone(),
            tuple: r.rows[row].tuple.clone(),
            provenance: r.rows[row].provenance,
        }
    }

    /// Looks up the endogenous index of a fact.
    ///
    /// Returns `NotEndogenous` if the fact exists but is exogenous and
    /// `FactNotFound` if it is absent altogether.
    pub fn fact_handle(&self, relation: &str, tuple: &[Constant]) -> Result<FactHandle> {
        let rendering = || {
            Fact {
                relation: relation.to_string(),
                tuple: tuple.to_vec(),
                provenance: Provenance::Exogenous,
            }
            .to_string()
        };
        let rel_idx = *self
            .by_name
            .get(relation)
            .ok_or_else(|| Error::FactNotFound(rendering()))?;
        let rel = &self.relations[rel_idx];
        for row in &rel.rows {
            if row.tuple == tuple {
                return match row.endo_index {
                    Some(i) => Ok(FactHandle(i)),
                    None => Err(Error::NotEndogenous(rendering())),
                };
            }
        }
        Err(Error::FactNotFound(rendering()))
    }

    /// Facts of `relation` visible under `mask` (exogenous facts always,
    /// endogenous ones when masked in). `None` means the full database.
    pub fn visible_facts<'a>(
        &'a self,
        relation: &str,
        mask: Option<&'a EndoMask>,
    ) -> impl Iterator<Item = &'a [Constant]> + 'a {
        let rel = self.by_name.get(relation).map(|&i| &self.relations[i]);
        rel.into_iter().flat_map(move |r| {
            r.rows.iter().filter_map(move |row| match row.endo_index {
                None => Some(row.tuple.as_slice()),
                Some(i) => match mask {
                    None => Some(row.tuple.as_slice()),
                    Some(m) if m.contains(i) => Some(row.tuple.as_slice()),
                    Some(_) => None,
                },
            })
        })
    }

    /// A copy of the database with `f` reclassified as exogenous (`D'` in the
    /// exact engine). Remaining endogenous facts are reindexed in order.
    pub fn with_fact_exogenous(&self, f: FactHandle) -> Database {
        self.rebuild(|idx| {
            if idx == f.0 {
                RebuildAction::MakeExogenous
            } else {
                RebuildAction::Keep
            }
        })
    }

    /// A copy of the database with `f` deleted (`D \ {f}`).
    pub fn without_fact(&self, f: FactHandle) -> Database {
        self.rebuild(|idx| {
            if idx == f.0 {
                RebuildAction::Drop
            } else {
                RebuildAction::Keep
            }
        })
    }

    fn rebuild(&self, action: impl Fn(usize) -> RebuildAction) -> Database {
        let mut relations = Vec::with_capacity(self.relations.len());
        for rel in &self.relations {
            let mut rows = Vec::with_capacity(rel.rows.len());
            for row in &rel.rows {
                match row.endo_index {
                    None => rows.push(row.clone()),
                    Some(i) => match action(i) {
                        RebuildAction::Keep => rows.push(row.clone()),
                        RebuildAction::MakeExogenous => rows.push(Row {
                            tuple: row.tuple.clone(),
                            provenance: Provenance::Exogenous,
                            endo_index: None,
                        }),
                        RebuildAction::Drop => {}
                    },
                }
            }
            relations.push(Relation {
                name: rel.name.clone(),
                arity: rel.arity,
                rows,
            });
        }
        finish_database(relations)
    }

    /// Writes the database back out as CSV files plus a manifest under `dir`.
    /// Returns the manifest path. Reloading yields an identical database.
    pub fn export_csv(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.display().to_string(),
            source: e,
        })?;
        let mut manifest = Manifest {
            relations: Vec::new(),
        };
        for (idx, rel) in self.relations.iter().enumerate() {
            let all_endo = rel
                .rows
                .iter()
                .all(|r| r.provenance == Provenance::Endogenous);
            let all_exo = rel
                .rows
                .iter()
                .all(|r| r.provenance == Provenance::Exogenous);
            let policy = if rel.rows.is_empty() || all_exo {
                ProvenancePolicy::Blanket(Provenance::Exogenous)
            } else if all_endo {
                ProvenancePolicy::Blanket(Provenance::Endogenous)
            } else {
                ProvenancePolicy::Column {
                    column: "prov".to_string(),
                }
            };
            let file = format!("rel_{idx}.csv");
            let path = dir.join(&file);
            let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Csv {
                path: path.display().to_string(),
                source: e,
            })?;
            let mut header: Vec<String> = (1..=rel.arity).map(|i| format!("c{i}")).collect();
            let with_prov = matches!(policy, ProvenancePolicy::Column { .. });
            if with_prov {
                header.push("prov".to_string());
            }
            w.write_record(&header).map_err(|e| Error::Csv {
                path: path.display().to_string(),
                source: e,
            })?;
            for row in &rel.rows {
                let mut record: Vec<String> = row.tuple.iter().map(|c| c.to_cell()).collect();
                if with_prov {
                    record.push(
                        match row.provenance {
                            Provenance::Endogenous => "endo",
                            Provenance::Exogenous => "exo",
                        }
                        .to_string(),
                    );
                }
                w.write_record(&record).map_err(|e| Error::Csv {
                    path: path.display().to_string(),
                    source: e,
                })?;
            }
            w.flush().map_err(|e| Error::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            manifest.relations.push(ManifestRelation {
                name: rel.name.clone(),
                arity: rel.arity,
                file,
                provenance: policy,
            });
        }
        let manifest_path = dir.join("manifest.json");
        let json = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::BadManifest(e.to_string()))?;
        std::fs::write(&manifest_path, json).map_err(|e| Error::Io {
            path: manifest_path.display().to_string(),
            source: e,
        })?;
        Ok(manifest_path)
    }
}

enum RebuildAction {
    Keep,
    MakeExogenous,
    Drop,
}

fn finish_database(relations: Vec<Relation>) -> Database {
    let mut relations = relations;
    let mut endo = Vec::new();
    for (rel_idx, rel) in relations.iter_mut().enumerate() {
        for (row_idx, row) in rel.rows.iter_mut().enumerate() {
            if row.provenance == Provenance::Endogenous {
                row.endo_index = Some(endo.len());
                endo.push((rel_idx, row_idx));
            } else {
                row.endo_index = None;
            }
        }
    }
    let by_name = relations
        .iter()
        .enumerate()
        .map(|(i, r)| (r.name.clone(), i))
        .collect();
    Database {
        relations,
        by_name,
        endo,
    }
}

/// Programmatic construction, used by tests, benchmarks and the synthetic
/// instance generators.
#[derive(Default)]
pub struct DatabaseBuilder {
    relations: Vec<Relation>,
    seen: HashMap<String, usize>,
    duplicates_dropped: usize,
}

impl DatabaseBuilder {
    pub fn relation(mut self, name: &str, arity: usize) -> Self {
        assert!(
            !self.seen.contains_key(name),
            "relation {name} declared twice"
        );
        self.seen.insert(name.to_string(), self.relations.len());
        self.relations.push(Relation {
            name: name.to_string(),
            arity,
            rows: Vec::new(),
        });
        self
    }

    pub fn fact(mut self, relation: &str, provenance: Provenance, tuple: Vec<Constant>) -> Self {
        let idx = *self
            .seen
            .get(relation)
            .unwrap_or_else(|| panic!("relation {relation} not declared"));
        let rel = &mut self.relations[idx];
        assert_eq!(rel.arity, tuple.len(), "arity mismatch on {relation}");
        if rel.rows.iter().any(|r| r.tuple == tuple) {
            self.duplicates_dropped += 1;
            return self;
        }
        rel.rows.push(Row {
            tuple,
            provenance,
            endo_index: None,
        });
        self
    }

    pub fn endo(self, relation: &str, tuple: Vec<Constant>) -> Self {
        self.fact(relation, Provenance::Endogenous, tuple)
    }

    pub fn exo(self, relation: &str, tuple: Vec<Constant>) -> Self {
        self.fact(relation, Provenance::Exogenous, tuple)
    }

    pub fn build(self) -> Database {
        finish_database(self.relations)
    }
}

// ---------------------------------------------------------------------------
// Manifest + CSV loading
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub relations: Vec<ManifestRelation>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ManifestRelation {
    pub name: String,
    pub arity: usize,
    pub file: String,
    pub provenance: ProvenancePolicy,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum ProvenancePolicy {
    /// `"endogenous"` or `"exogenous"` applied to every row.
    Blanket(Provenance),
    /// Per-row provenance from a CSV column holding `endo` / `exo`.
    Column { column: String },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LoadReport {
    /// `(relation, rows kept)` in manifest order.
    pub relations: Vec<(String, usize)>,
    pub duplicates_dropped: usize,
}

/// Loads a database from a JSON manifest describing per-relation CSV files.
/// CSV paths are resolved relative to the manifest's directory.
pub fn load_database(manifest_path: &Path) -> Result<(Database, LoadReport)> {
    let text = std::fs::read_to_string(manifest_path).map_err(|e| Error::Io {
        path: manifest_path.display().to_string(),
        source: e,
    })?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::BadManifest(e.to_string()))?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));

    let mut relations: Vec<Relation> = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut report = LoadReport::default();

    for decl in &manifest.relations {
        if seen.contains_key(&decl.name) {
            return Err(Error::DuplicateRelation(decl.name.clone()));
        }
        seen.insert(decl.name.clone(), relations.len());

        let path = base.join(&decl.file);
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_path(&path)
            .map_err(|e| Error::Csv {
                path: path.display().to_string(),
                source: e,
            })?;

        let prov_col = match &decl.provenance {
            ProvenancePolicy::Blanket(_) => None,
            ProvenancePolicy::Column { column } => {
                let headers = reader.headers().map_err(|e| Error::Csv {
                    path: path.display().to_string(),
                    source: e,
                })?;
                let pos = headers.iter().position(|h| h == column).ok_or_else(|| {
                    Error::MissingProvenanceColumn {
                        relation: decl.name.clone(),
                        column: column.clone(),
                    }
                })?;
                Some(pos)
            }
        };

        let mut rows: Vec<Row> = Vec::new();
        for (row_idx, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Csv {
                path: path.display().to_string(),
                source: e,
            })?;
            let expected = decl.arity + usize::from(prov_col.is_some());
            if record.len() != expected {
                return Err(Error::ArityMismatch {
                    relation: decl.name.clone(),
                    row: row_idx + 1,
                    expected,
                    found: record.len(),
                });
            }
            let provenance = match (&decl.provenance, prov_col) {
                (ProvenancePolicy::Blanket(p), _) => *p,
                (_, Some(col)) => match record.get(col).unwrap_or("") {
                    "endo" => Provenance::Endogenous,
                    "exo" => Provenance::Exogenous,
                    other => {
                        return Err(Error::BadProvenanceValue {
                            relation: decl.name.clone(),
                            row: row_idx + 1,
                            value: other.to_string(),
                        })
                    }
                },
                (_, None) => unreachable!(),
            };
            let tuple: Vec<Constant> = record
                .iter()
                .enumerate()
                .filter(|(i, _)| Some(*i) != prov_col)
                .map(|(_, cell)| Constant::sniff(cell))
                .collect();
            if rows.iter().any(|r| r.tuple == tuple) {
                report.duplicates_dropped += 1;
                continue;
            }
            rows.push(Row {
                tuple,
                provenance,
                endo_index: None,
            });
        }
        report.relations.push((decl.name.clone(), rows.len()));
        relations.push(Relation {
            name: decl.name.clone(),
            arity: decl.arity,
            rows,
        });
    }

    Ok((finish_database(relations), report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, contents: &str) {
        std::fs::write(dir.join(name), contents).unwrap();
    }

    fn running_example_files(dir: &Path) {
        write(
            dir,
            "author.csv",
            "name,affil\nAlice,UCLA\nBob,NYU\nCathy,UCSD\nDavid,MIT\nEllen,UCSD\n",
        );
        write(
            dir,
            "inst.csv",
            "name,state\nUCLA,CA\nUCSD,CA\nNYU,NY\nMIT,MA\n",
        );
        write(
            dir,
            "pub.csv",
            "author,pub\nAlice,A\nAlice,B\nBob,C\nCathy,C\nCathy,D\nDavid,C\n",
        );
        write(dir, "citations.csv", "paper,cits\nA,18\nB,2\nC,8\nD,12\n");
        write(
            dir,
            "manifest.json",
            r#"{"relations":[
                {"name":"Author","arity":2,"file":"author.csv","provenance":"endogenous"},
                {"name":"Inst","arity":2,"file":"inst.csv","provenance":"exogenous"},
                {"name":"Pub","arity":2,"file":"pub.csv","provenance":"exogenous"},
                {"name":"Citations","arity":2,"file":"citations.csv","provenance":"exogenous"}
            ]}"#,
        );
    }

    #[test]
    fn loads_running_example() {
        let dir = tempfile::tempdir().unwrap();
        running_example_files(dir.path());
        let (db, report) = load_database(&dir.path().join("manifest.json")).unwrap();
        assert_eq!(db.endo_count(), 5);
        assert_eq!(db.exo_count(), 14);
        assert_eq!(report.duplicates_dropped, 0);
        // D_n order follows manifest then row order.
        let f0 = db.endo_fact(FactHandle(0));
        assert_eq!(f0.relation, "Author");
        assert_eq!(f0.tuple, tuple!["Alice", "UCLA"]);
        // Citation counts sniff to integers.
        let cit = db.relation("Citations").unwrap();
        let first = cit.facts().next().unwrap();
        assert_eq!(first.0, &tuple!["A", 18][..]);
    }

    #[test]
    fn empty_manifest_gives_empty_database() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "manifest.json", r#"{"relations":[]}"#);
        let (db, _) = load_database(&dir.path().join("manifest.json")).unwrap();
        assert_eq!(db.endo_count(), 0);
        assert_eq!(db.exo_count(), 0);
    }

    #[test]
    fn duplicate_rows_are_dropped_and_counted() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "r.csv", "a\nx\nx\ny\n");
        write(
            dir.path(),
            "manifest.json",
            r#"{"relations":[{"name":"R","arity":1,"file":"r.csv","provenance":"endogenous"}]}"#,
        );
        let (db, report) = load_database(&dir.path().join("manifest.json")).unwrap();
        assert_eq!(db.endo_count(), 2);
        assert_eq!(report.duplicates_dropped, 1);
    }

    #[test]
    fn arity_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "r.csv", "a,b\nx,y\nx,y,z\n");
        write(
            dir.path(),
            "manifest.json",
            r#"{"relations":[{"name":"R","arity":2,"file":"r.csv","provenance":"exogenous"}]}"#,
        );
        let err = load_database(&dir.path().join("manifest.json")).unwrap_err();
        assert!(matches!(err, Error::ArityMismatch { row: 2, .. }));
    }

    #[test]
    fn provenance_column_is_honoured_and_validated() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "r.csv", "a,prov\nx,endo\ny,exo\n");
        write(
            dir.path(),
            "manifest.json",
            r#"{"relations":[{"name":"R","arity":1,"file":"r.csv","provenance":{"column":"prov"}}]}"#,
        );
        let (db, _) = load_database(&dir.path().join("manifest.json")).unwrap();
        assert_eq!(db.endo_count(), 1);
        assert_eq!(db.exo_count(), 1);

        write(dir.path(), "r.csv", "a,prov\nx,endogenous\n");
        let err = load_database(&dir.path().join("manifest.json")).unwrap_err();
        assert!(matches!(err, Error::BadProvenanceValue { .. }));
    }

    #[test]
    fn duplicate_relation_in_manifest_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "r.csv", "a\nx\n");
        write(
            dir.path(),
            "manifest.json",
            r#"{"relations":[
                {"name":"R","arity":1,"file":"r.csv","provenance":"endogenous"},
                {"name":"R","arity":1,"file":"r.csv","provenance":"exogenous"}
            ]}"#,
        );
        let err = load_database(&dir.path().join("manifest.json")).unwrap_err();
        assert!(matches!(err, Error::DuplicateRelation(_)));
    }

    #[test]
    fn fact_handle_discriminates_endo_exo_missing() {
        let dir = tempfile::tempdir().unwrap();
        running_example_files(dir.path());
        let (db, _) = load_database(&dir.path().join("manifest.json")).unwrap();
        let h = db.fact_handle("Author", &tuple!["Alice", "UCLA"]).unwrap();
        assert_eq!(h.index(), 0);
        assert!(matches!(
            db.fact_handle("Inst", &tuple!["UCLA", "CA"]),
            Err(Error::NotEndogenous(_))
        ));
        assert!(matches!(
            db.fact_handle("Author", &tuple!["Zoe", "MIT"]),
            Err(Error::FactNotFound(_))
        ));
    }

    #[test]
    fn reprovenance_and_deletion_reindex() {
        let db = Database::builder()
            .relation("R", 1)
            .endo("R", tuple![1])
            .endo("R", tuple![2])
            .endo("R", tuple![3])
            .build();
        let f1 = db.fact_handle("R", &tuple![2]).unwrap();
        let dp = db.with_fact_exogenous(f1);
        assert_eq!(dp.endo_count(), 2);
        assert_eq!(dp.exo_count(), 1);
        assert!(matches!(
            dp.fact_handle("R", &tuple![2]),
            Err(Error::NotEndogenous(_))
        ));
        let dm = db.without_fact(f1);
        assert_eq!(dm.endo_count(), 2);
        assert!(matches!(
            dm.fact_handle("R", &tuple![2]),
            Err(Error::FactNotFound(_))
        ));
        // remaining facts are reindexed in order
        assert_eq!(dm.fact_handle("R", &tuple![3]).unwrap().index(), 1);
    }

    #[test]
    fn export_reload_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        running_example_files(dir.path());
        let (db, _) = load_database(&dir.path().join("manifest.json")).unwrap();
        let out = tempfile::tempdir().unwrap();
        let manifest = db.export_csv(out.path()).unwrap();
        let (db2, _) = load_database(&manifest).unwrap();
        assert_eq!(db, db2);
    }

    #[test]
    fn sniffing_rules() {
        assert_eq!(Constant::sniff("18"), Constant::Int(18));
        assert_eq!(Constant::sniff("-5"), Constant::Int(-5));
        assert_eq!(Constant::sniff("-"), Constant::Str("-".into()));
        assert_eq!(Constant::sniff("UCLA"), Constant::Str("UCLA".into()));
        assert_eq!(Constant::sniff("1.5"), Constant::Str("1.5".into()));
        // i64 overflow stays a string
        let big = "99999999999999999999999";
        assert_eq!(Constant::sniff(big), Constant::Str(big.into()));
    }
}
