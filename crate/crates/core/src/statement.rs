//! Statement data model, `statements.json` schema, validation and ordering.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::canonical::{byte_offset, to_canonical_json};
use crate::graph;

/// The six kinds of extracted mathematical statements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatementKind {
    Definition,
    Theorem,
    Lemma,
    Proposition,
    Corollary,
    Remark,
}

impl StatementKind {
    pub const ALL: [StatementKind; 6] = [
        StatementKind::Definition,
        StatementKind::Theorem,
        StatementKind::Lemma,
        StatementKind::Proposition,
        StatementKind::Corollary,
        StatementKind::Remark,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StatementKind::Definition => "definition",
            StatementKind::Theorem => "theorem",
            StatementKind::Lemma => "lemma",
            StatementKind::Proposition => "proposition",
            StatementKind::Corollary => "corollary",
            StatementKind::Remark => "remark",
        }
    }

    /// Prefix used in statement ids (`Def_1`, `Thm_2`, ...).
    pub fn id_tag(self) -> &'static str {
        match self {
            StatementKind::Definition => "Def",
            StatementKind::Theorem => "Thm",
            StatementKind::Lemma => "Lem",
            StatementKind::Proposition => "Prop",
            StatementKind::Corollary => "Cor",
            StatementKind::Remark => "Rem",
        }
    }

    /// Capitalized name used in report tables.
    pub fn title(self) -> &'static str {
        match self {
            StatementKind::Definition => "Definition",
            StatementKind::Theorem => "Theorem",
            StatementKind::Lemma => "Lemma",
            StatementKind::Proposition => "Proposition",
            StatementKind::Corollary => "Corollary",
            StatementKind::Remark => "Remark",
        }
    }

    fn from_id_tag(tag: &str) -> Option<StatementKind> {
        StatementKind::ALL.into_iter().find(|k| k.id_tag() == tag)
    }
}

impl fmt::Display for StatementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StatementKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StatementKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown statement kind `{s}`"))
    }
}

/// A statement identifier of the form `<KindTag>_<N>`, `N` a positive
/// integer without leading zeros.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct StatementId(String);

impl StatementId {
    pub fn parse(s: &str) -> Result<StatementId, String> {
        let (tag, number) = s
            .split_once('_')
            .ok_or_else(|| format!("id `{s}` does not match <KindTag>_<N>"))?;
        if StatementKind::from_id_tag(tag).is_none() {
            return Err(format!("id `{s}` has unknown kind tag `{tag}`"));
        }
        let valid_number = !number.is_empty()
            && number.bytes().all(|b| b.is_ascii_digit())
            && !number.starts_with('0');
        if !valid_number {
            return Err(format!("id `{s}` must end in a positive integer"));
        }
        Ok(StatementId(s.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The kind implied by the id's tag.
    pub fn kind(&self) -> StatementKind {
        let tag = self.0.split('_').next().unwrap_or_default();
        StatementKind::from_id_tag(tag).expect("validated on construction")
    }
}

impl fmt::Display for StatementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for StatementId {
    type Error = String;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        StatementId::parse(&value)
    }
}

impl From<StatementId> for String {
    fn from(id: StatementId) -> String {
        id.0
    }
}

/// One extracted mathematical result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Statement {
    pub id: StatementId,
    pub kind: StatementKind,
    pub text: String,
    pub dependencies: Vec<StatementId>,
    pub proof_sketch: Option<String>,
    pub source_span: Option<(usize, usize)>,
}

impl Statement {
    /// Builds a statement, enforcing the per-statement invariants.
    pub fn new(
        id: &str,
        kind: StatementKind,
        text: impl Into<String>,
        dependencies: &[&str],
    ) -> Result<Statement, StatementError> {
        let deps = dependencies
            .iter()
            .map(|d| StatementId::parse(d))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|message| StatementError::schema(None, Some("dependencies"), message))?;
        let id = StatementId::parse(id).map_err(|m| StatementError::schema(None, Some("id"), m))?;
        let stmt = Statement {
            id,
            kind,
            text: text.into(),
            dependencies: deps,
            proof_sketch: None,
            source_span: None,
        };
        stmt.check(None)?;
        Ok(stmt)
    }

    pub fn with_proof_sketch(mut self, sketch: impl Into<String>) -> Statement {
        self.proof_sketch = Some(sketch.into());
        self
    }

    fn check(&self, index: Option<usize>) -> Result<(), StatementError> {
        if self.id.kind() != self.kind {
            return Err(StatementError::schema(
                index,
                Some("kind"),
                format!(
                    "kind/id mismatch: id `{}` requires kind `{}`, got `{}`",
                    self.id,
                    self.id.kind(),
                    self.kind
                ),
            ));
        }
        if self.text.trim().is_empty() {
            return Err(StatementError::schema(index, Some("text"), "text is empty"));
        }
        let mut seen = HashSet::new();
        for dep in &self.dependencies {
            if dep == &self.id {
                return Err(StatementError::schema(
                    index,
                    Some("dependencies"),
                    format!("`{}` depends on itself", self.id),
                ));
            }
            if !seen.insert(dep) {
                return Err(StatementError::schema(
                    index,
                    Some("dependencies"),
                    format!("duplicate dependency `{dep}`"),
                ));
            }
        }
        if let Some((start, end)) = self.source_span {
            if start > end {
                return Err(StatementError::schema(
                    index,
                    Some("source_span"),
                    "span start exceeds end",
                ));
            }
        }
        Ok(())
    }
}

/// An ordered collection of statements extracted from one LaTeX source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatementSet {
    pub source_fingerprint: String,
    pub statements: Vec<Statement>,
}

impl StatementSet {
    pub fn new(source_fingerprint: impl Into<String>, statements: Vec<Statement>) -> Self {
        StatementSet { source_fingerprint: source_fingerprint.into(), statements }
    }

    pub fn len(&self) -> usize {
        self.statements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }

    pub fn get(&self, id: &StatementId) -> Option<&Statement> {
        self.statements.iter().find(|s| &s.id == id)
    }

    /// Returns a copy with statements rearranged by [`topological_order`].
    pub fn topologically_sorted(&self) -> Result<StatementSet, StatementError> {
        let order = topological_order(self)?;
        let by_id: HashMap<&StatementId, &Statement> =
            self.statements.iter().map(|s| (&s.id, s)).collect();
        Ok(StatementSet {
            source_fingerprint: self.source_fingerprint.clone(),
            statements: order.iter().map(|id| by_id[id].clone()).collect(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub severity: Severity,
    /// Statement id, or `<set>` for set-level problems.
    pub subject: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn from_issues(issues: Vec<Issue>) -> Self {
        let ok = !issues.iter().any(|i| i.severity == Severity::Error);
        ValidationReport { ok, issues }
    }

    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            return f.write_str("no issues");
        }
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            let sev = match issue.severity {
                Severity::Error => "error",
                Severity::Warning => "warning",
            };
            write!(f, "{sev}: {}: {}", issue.subject, issue.message)?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StatementError {
    #[error("malformed JSON at byte {offset}: {message}")]
    Json { offset: usize, message: String },
    #[error("schema error{}: {message}", schema_location(*.index, .field.as_deref()))]
    Schema { index: Option<usize>, field: Option<String>, message: String },
    #[error("dependency cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
}

fn schema_location(index: Option<usize>, field: Option<&str>) -> String {
    match (index, field) {
        (Some(i), Some(f)) => format!(" in statements[{i}].{f}"),
        (Some(i), None) => format!(" in statements[{i}]"),
        (None, Some(f)) => format!(" in field `{f}`"),
        (None, None) => String::new(),
    }
}

impl StatementError {
    fn schema(index: Option<usize>, field: Option<&str>, message: impl Into<String>) -> Self {
        StatementError::Schema {
            index,
            field: field.map(str::to_string),
            message: message.into(),
        }
    }
}

/// Parses a `statements.json` document. Per-statement invariants are
/// enforced; set-level invariants are left to [`validate`].
pub fn parse_statement_set(bytes: &[u8]) -> Result<StatementSet, StatementError> {
    let text = std::str::from_utf8(bytes).map_err(|e| StatementError::Json {
        offset: e.valid_up_to(),
        message: "document is not valid UTF-8".into(),
    })?;
    let value: Value = serde_json::from_str(text).map_err(|e| StatementError::Json {
        offset: byte_offset(text, e.line(), e.column()),
        message: e.to_string(),
    })?;
    let root = value
        .as_object()
        .ok_or_else(|| StatementError::schema(None, None, "document root must be an object"))?;
    let fingerprint = match root.get("source_fingerprint") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => {
            return Err(StatementError::schema(
                None,
                Some("source_fingerprint"),
                "must be a string",
            ))
        }
        None => {
            return Err(StatementError::schema(
                None,
                Some("source_fingerprint"),
                "missing required field `source_fingerprint`",
            ))
        }
    };
    let list = match root.get("statements") {
        Some(Value::Array(a)) => a,
        Some(_) => return Err(StatementError::schema(None, Some("statements"), "must be an array")),
        None => {
            return Err(StatementError::schema(
                None,
                Some("statements"),
                "missing required field `statements`",
            ))
        }
    };
    let statements = list
        .iter()
        .enumerate()
        .map(|(i, v)| parse_statement(i, v))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(StatementSet { source_fingerprint: fingerprint, statements })
}

fn parse_statement(index: usize, value: &Value) -> Result<Statement, StatementError> {
    let obj = value
        .as_object()
        .ok_or_else(|| StatementError::schema(Some(index), None, "statement must be an object"))?;
    let required_str = |field: &str| -> Result<String, StatementError> {
        match obj.get(field) {
            Some(Value::String(s)) => Ok(s.clone()),
            Some(_) => Err(StatementError::schema(Some(index), Some(field), "must be a string")),
            None => Err(StatementError::schema(
                Some(index),
                Some(field),
                format!("missing required field `{field}`"),
            )),
        }
    };
    let id = StatementId::parse(&required_str("id")?)
        .map_err(|m| StatementError::schema(Some(index), Some("id"), m))?;
    let kind: StatementKind = required_str("kind")?
        .parse()
        .map_err(|m: String| StatementError::schema(Some(index), Some("kind"), m))?;
    let text = required_str("text")?;
    let dependencies = parse_dependencies(index, obj)?;
    let proof_sketch = match obj.get("proof_sketch") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => {
            return Err(StatementError::schema(
                Some(index),
                Some("proof_sketch"),
                "must be a string or null",
            ))
        }
    };
    let source_span = match obj.get("source_span") {
        None | Some(Value::Null) => None,
        Some(Value::Array(a)) if a.len() == 2 => match (a[0].as_u64(), a[1].as_u64()) {
            (Some(s), Some(e)) => Some((s as usize, e as usize)),
            _ => {
                return Err(StatementError::schema(
                    Some(index),
                    Some("source_span"),
                    "span bounds must be non-negative integers",
                ))
            }
        },
        Some(_) => {
            return Err(StatementError::schema(
                Some(index),
                Some("source_span"),
                "must be [start, end] or null",
            ))
        }
    };
    let stmt = Statement { id, kind, text, dependencies, proof_sketch, source_span };
    stmt.check(Some(index))?;
    Ok(stmt)
}

fn parse_dependencies(
    index: usize,
    obj: &Map<String, Value>,
) -> Result<Vec<StatementId>, StatementError> {
    let field = Some("dependencies");
    let items = match obj.get("dependencies") {
        Some(Value::Array(a)) => a,
        Some(_) => return Err(StatementError::schema(Some(index), field, "must be an array")),
        None => {
            return Err(StatementError::schema(
                Some(index),
                field,
                "missing required field `dependencies`",
            ))
        }
    };
    items
        .iter()
        .map(|v| {
            let s = v.as_str().ok_or_else(|| {
                StatementError::schema(Some(index), field, "dependency ids must be strings")
            })?;
            StatementId::parse(s).map_err(|m| StatementError::schema(Some(index), field, m))
        })
        .collect()
}

/// Canonical `statements.json` bytes.
pub fn serialize_statement_set(set: &StatementSet) -> Vec<u8> {
    to_canonical_json(set).expect("statement sets always serialize")
}

/// Checks the set-level invariants.
pub fn validate(set: &StatementSet) -> ValidationReport {
    let mut issues = Vec::new();
    let mut error = |subject: &str, message: String| {
        issues.push(Issue { severity: Severity::Error, subject: subject.to_string(), message });
    };

    let mut position: HashMap<&StatementId, usize> = HashMap::new();
    for (i, s) in set.statements.iter().enumerate() {
        if position.contains_key(&s.id) {
            error(s.id.as_str(), format!("duplicate id `{}`", s.id));
        } else {
            position.insert(&s.id, i);
        }
    }
    for s in &set.statements {
        for dep in &s.dependencies {
            if !position.contains_key(dep) {
                error(s.id.as_str(), format!("dangling dependency `{dep}`"));
            }
        }
    }

    let deps = dependency_indices(set, &position);
    for cycle in cycles(&deps) {
        let ids: Vec<&str> = cycle.iter().map(|&i| set.statements[i].id.as_str()).collect();
        error("<set>", format!("dependency cycle among {}", ids.join(", ")));
    }

    for (i, s) in set.statements.iter().enumerate() {
        let late: Vec<&str> = s
            .dependencies
            .iter()
            .filter(|d| position.get(d).is_some_and(|&p| p > i))
            .map(|d| d.as_str())
            .collect();
        if !late.is_empty() {
            error(
                s.id.as_str(),
                format!("order violates dependencies: listed before {}", late.join(", ")),
            );
        }
    }

    for s in &set.statements {
        let needs_sketch = matches!(s.kind, StatementKind::Theorem | StatementKind::Lemma);
        let empty = s.proof_sketch.as_deref().map_or(true, |p| p.trim().is_empty());
        if needs_sketch && empty {
            issues.push(Issue {
                severity: Severity::Warning,
                subject: s.id.to_string(),
                message: "empty proof_sketch".into(),
            });
        }
    }
    ValidationReport::from_issues(issues)
}

fn dependency_indices(set: &StatementSet, position: &HashMap<&StatementId, usize>) -> Vec<Vec<usize>> {
    set.statements
        .iter()
        .map(|s| s.dependencies.iter().filter_map(|d| position.get(d).copied()).collect())
        .collect()
}

/// Every strongly connected component with more than one node, members in
/// list order, components ordered by their first member.
fn cycles(deps: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut g = petgraph::graph::DiGraph::<(), ()>::new();
    let nodes: Vec<_> = (0..deps.len()).map(|_| g.add_node(())).collect();
    for (i, ds) in deps.iter().enumerate() {
        for &d in ds {
            g.add_edge(nodes[i], nodes[d], ());
        }
    }
    let mut out: Vec<Vec<usize>> = petgraph::algo::tarjan_scc(&g)
        .into_iter()
        .filter(|c| c.len() > 1)
        .map(|c| {
            let mut v: Vec<usize> = c.into_iter().map(|n| n.index()).collect();
            v.sort_unstable();
            v
        })
        .collect();
    out.sort();
    out
}

/// Dependency-respecting order; ties keep the input order. Dependencies that
/// name no statement in the set are ignored here (see [`validate`]).
pub fn topological_order(set: &StatementSet) -> Result<Vec<StatementId>, StatementError> {
    let mut position: HashMap<&StatementId, usize> = HashMap::new();
    for (i, s) in set.statements.iter().enumerate() {
        position.entry(&s.id).or_insert(i);
    }
    let deps = dependency_indices(set, &position);
    graph::stable_topological_order(&deps)
        .map(|order| order.into_iter().map(|i| set.statements[i].id.clone()).collect())
        .map_err(|cycle| {
            StatementError::Cycle(cycle.into_iter().map(|i| set.statements[i].id.to_string()).collect())
        })
}

/// Id → statement lookup helper used by later stages.
pub fn index_by_id(set: &StatementSet) -> BTreeMap<StatementId, &Statement> {
    set.statements.iter().map(|s| (s.id.clone(), s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stmt(id: &str, deps: &[&str]) -> Statement {
        let kind = StatementId::parse(id).unwrap().kind();
        let s = Statement::new(id, kind, format!("content of {id}"), deps).unwrap();
        if matches!(kind, StatementKind::Theorem | StatementKind::Lemma) {
            s.with_proof_sketch("direct")
        } else {
            s
        }
    }

    fn set(stmts: Vec<Statement>) -> StatementSet {
        StatementSet::new("00", stmts)
    }

    #[test]
    fn parse_empty_set() {
        let s = parse_statement_set(br#"{"source_fingerprint":"abc","statements":[]}"#).unwrap();
        assert!(s.is_empty());
        assert_eq!(s.source_fingerprint, "abc");
    }

    #[test]
    fn parse_minimal_statement() {
        let doc = br#"{"source_fingerprint":"f","statements":[{"id":"Def_1","kind":"definition","text":"A widget is blue.","dependencies":[]}]}"#;
        let s = parse_statement_set(doc).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.statements[0].proof_sketch, None);
    }

    #[test]
    fn kind_id_mismatch_is_rejected() {
        let doc = br#"{"source_fingerprint":"f","statements":[{"id":"Thm_2","kind":"remark","text":"x","dependencies":[]}]}"#;
        let err = parse_statement_set(doc).unwrap_err();
        assert!(err.to_string().contains("kind/id mismatch"), "{err}");
    }

    #[test]
    fn malformed_json_reports_byte_offset() {
        let doc = b"{\"source_fingerprint\": \"f\",\n \"statements\": [,]}";
        match parse_statement_set(doc).unwrap_err() {
            StatementError::Json { offset, .. } => assert_eq!(doc[offset], b','),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn missing_field_names_field_and_index() {
        let doc = br#"{"source_fingerprint":"f","statements":[
            {"id":"Def_1","kind":"definition","text":"a","dependencies":[]},
            {"id":"Def_2","kind":"definition","dependencies":[]}]}"#;
        match parse_statement_set(doc).unwrap_err() {
            StatementError::Schema { index, field, .. } => {
                assert_eq!(index, Some(1));
                assert_eq!(field.as_deref(), Some("text"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn bad_ids_and_kinds_are_rejected() {
        for id in ["Def_0", "Def_01", "Foo_1", "Def1", "Def_", "Def_x"] {
            assert!(StatementId::parse(id).is_err(), "{id}");
        }
        let doc = br#"{"source_fingerprint":"f","statements":[{"id":"Def_1","kind":"axiom","text":"a","dependencies":[]}]}"#;
        assert!(parse_statement_set(doc).is_err());
    }

    #[test]
    fn self_and_duplicate_dependencies_are_rejected() {
        assert!(Statement::new("Lem_1", StatementKind::Lemma, "x", &["Lem_1"]).is_err());
        assert!(Statement::new("Lem_1", StatementKind::Lemma, "x", &["Def_1", "Def_1"]).is_err());
        assert!(Statement::new("Lem_1", StatementKind::Lemma, "  \n", &[]).is_err());
    }

    #[test]
    fn serialization_is_deterministic_and_key_order_free() {
        let empty = set(vec![]);
        assert_eq!(serialize_statement_set(&empty), serialize_statement_set(&empty));
        let a = br#"{"statements":[{"text":"t","dependencies":[],"kind":"definition","id":"Def_1"}],"source_fingerprint":"f"}"#;
        let b = br#"{"source_fingerprint":"f","statements":[{"id":"Def_1","kind":"definition","text":"t","dependencies":[]}]}"#;
        let sa = serialize_statement_set(&parse_statement_set(a).unwrap());
        let sb = serialize_statement_set(&parse_statement_set(b).unwrap());
        assert_eq!(sa, sb);
    }

    #[test]
    fn three_statement_round_trip() {
        let mut s = set(vec![stmt("Def_1", &[]), stmt("Lem_1", &["Def_1"]), stmt("Thm_1", &["Lem_1", "Def_1"])]);
        s.statements[0].source_span = Some((3, 40));
        let bytes = serialize_statement_set(&s);
        assert_eq!(parse_statement_set(&bytes).unwrap(), s);
    }

    #[test]
    fn validate_clean_singleton() {
        let r = validate(&set(vec![stmt("Def_1", &[])]));
        assert!(r.ok);
        assert!(r.issues.is_empty());
    }

    #[test]
    fn validate_order_violation() {
        let r = validate(&set(vec![stmt("Thm_1", &["Lem_1"]), stmt("Lem_1", &[])]));
        assert!(!r.ok);
        let e: Vec<_> = r.errors().collect();
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].subject, "Thm_1");
        assert!(e[0].message.contains("order violates dependencies"));
    }

    #[test]
    fn validate_cycle_lists_both_ids() {
        let r = validate(&set(vec![stmt("Lem_1", &["Lem_2"]), stmt("Lem_2", &["Lem_1"])]));
        assert!(!r.ok);
        let cycle = r.errors().find(|i| i.message.contains("dependency cycle")).unwrap();
        assert!(cycle.message.contains("Lem_1") && cycle.message.contains("Lem_2"));
    }

    #[test]
    fn validate_duplicates_dangling_and_sketch_warning() {
        let mut thm = stmt("Thm_1", &["Def_9"]);
        thm.proof_sketch = None;
        let r = validate(&set(vec![stmt("Def_1", &[]), stmt("Def_1", &[]), thm]));
        assert!(!r.ok);
        let msgs: Vec<_> = r.issues.iter().map(|i| i.message.as_str()).collect();
        assert!(msgs.iter().any(|m| m.contains("duplicate id")));
        assert!(msgs.iter().any(|m| m.contains("dangling dependency `Def_9`")));
        assert!(r
            .issues
            .iter()
            .any(|i| i.severity == Severity::Warning && i.subject == "Thm_1"));
    }

    #[test]
    fn warnings_alone_keep_ok() {
        let r = validate(&set(vec![Statement::new("Lem_1", StatementKind::Lemma, "x", &[]).unwrap()]));
        assert!(r.ok);
        assert_eq!(r.issues.len(), 1);
    }

    #[test]
    fn topological_order_examples() {
        assert!(topological_order(&set(vec![])).unwrap().is_empty());
        let s = set(vec![stmt("Thm_1", &["Lem_1"]), stmt("Lem_1", &["Def_1"]), stmt("Def_1", &[])]);
        let ids: Vec<String> = topological_order(&s).unwrap().into_iter().map(String::from).collect();
        assert_eq!(ids, ["Def_1", "Lem_1", "Thm_1"]);
    }

    #[test]
    fn topological_order_cycle_has_witness() {
        let s = set(vec![stmt("Def_1", &[]), stmt("Lem_1", &["Lem_2"]), stmt("Lem_2", &["Lem_1"])]);
        match topological_order(&s).unwrap_err() {
            StatementError::Cycle(ids) => {
                let mut ids = ids;
                ids.sort();
                assert_eq!(ids, ["Lem_1", "Lem_2"]);
            }
            other => panic!("unexpected {other}"),
        }
    }
}
