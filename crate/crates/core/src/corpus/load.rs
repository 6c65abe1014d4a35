//! Corpus file schema and validation.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    fallback_lemma, tokenize_strs, ActionAnnotation, Actor, ArgKind, ArgumentSpan,
    AnnotatorRecord, Category, Corpus, CorpusError, Scenario, Sentence, Token, TokenRange,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawCorpus {
    pub scenarios: Vec<RawScenario>,
    #[serde(default)]
    pub gold_annotations: Vec<RawAnnotation>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub annotator_records: Vec<RawRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawScenario {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub app_name: Option<String>,
    pub raw_text: String,
    pub sentences: Vec<RawSentence>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSentence {
    pub index: usize,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawAnnotation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario_id: Option<String>,
    pub sentence_index: usize,
    pub verb_range: TokenRange,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verb_lemma: Option<String>,
    pub category: Category,
    pub actor: Actor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actor_name: Option<String>,
    #[serde(default)]
    pub arguments: Vec<RawArgument>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawArgument {
    pub kind: ArgKind,
    pub range: TokenRange,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRecord {
    pub annotator_id: String,
    pub scenario_id: String,
    #[serde(default)]
    pub annotations: Vec<RawAnnotation>,
}

/// Read and validate a corpus file.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_corpus(&text)
}

/// Validate corpus JSON text.
pub fn parse_corpus(text: &str) -> Result<Corpus, CorpusError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let raw: RawCorpus = serde_path_to_error::deserialize(&mut de).map_err(|err| {
        CorpusError::Schema {
            pointer: json_pointer(err.path()),
            message: err.inner().to_string(),
        }
    })?;
    resolve(raw)
}

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

impl RawCorpus {
    pub fn resolve(self) -> Result<Corpus, CorpusError> {
        resolve(self)
    }
}

fn resolve(raw: RawCorpus) -> Result<Corpus, CorpusError> {
    let mut seen = HashSet::new();
    let mut scenarios = Vec::with_capacity(raw.scenarios.len());
    for (si, rs) in raw.scenarios.into_iter().enumerate() {
        let base = format!("/scenarios/{si}");
        if !seen.insert(rs.id.clone()) {
            return Err(invalid(&format!("{base}/id"), format!("duplicate scenario id {:?}", rs.id)));
        }
        scenarios.push(resolve_scenario(rs, &base)?);
    }
    let corpus = Corpus::from_parts(scenarios, Vec::new(), Vec::new());

    let mut gold = Vec::with_capacity(raw.gold_annotations.len());
    for (ai, ra) in raw.gold_annotations.into_iter().enumerate() {
        let base = format!("/gold_annotations/{ai}");
        let Some(scenario_id) = ra.scenario_id.clone() else {
            return Err(CorpusError::Schema {
                pointer: format!("{base}/scenario_id"),
                message: "missing field `scenario_id`".into(),
            });
        };
        gold.push(resolve_annotation(&corpus, ra, scenario_id, &base, true)?);
    }

    let mut records = Vec::with_capacity(raw.annotator_records.len());
    for (ri, rr) in raw.annotator_records.into_iter().enumerate() {
        let base = format!("/annotator_records/{ri}");
        if corpus.scenario(&rr.scenario_id).is_none() {
            return Err(CorpusError::DanglingReference {
                pointer: format!("{base}/scenario_id"),
                detail: format!("unknown scenario {:?}", rr.scenario_id),
            });
        }
        let mut annotations = Vec::with_capacity(rr.annotations.len());
        for (ai, ra) in rr.annotations.into_iter().enumerate() {
            let abase = format!("{base}/annotations/{ai}");
            let sid = ra.scenario_id.clone().unwrap_or_else(|| rr.scenario_id.clone());
            if sid != rr.scenario_id {
                return Err(CorpusError::DanglingReference {
                    pointer: format!("{abase}/scenario_id"),
                    detail: format!(
                        "annotation references scenario {sid:?} inside a record for {:?}",
                        rr.scenario_id
                    ),
                });
            }
            annotations.push(resolve_annotation(&corpus, ra, sid, &abase, false)?);
        }
        records.push(AnnotatorRecord {
            annotator_id: rr.annotator_id,
            scenario_id: rr.scenario_id,
            annotations,
        });
    }

    let Corpus { scenarios, .. } = corpus;
    Ok(Corpus::from_parts(scenarios, gold, records))
}

fn resolve_scenario(rs: RawScenario, base: &str) -> Result<Scenario, CorpusError> {
    let mut sentences = Vec::with_capacity(rs.sentences.len());
    let mut flat: Vec<&str> = Vec::new();
    for (pos, sent) in rs.sentences.iter().enumerate() {
        if sent.index != pos {
            return Err(invalid(
                &format!("{base}/sentences/{pos}/index"),
                format!("sentence index {} at position {pos}; indices must be contiguous from 0", sent.index),
            ));
        }
        for (ti, tok) in sent.tokens.iter().enumerate() {
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(invalid(
                    &format!("{base}/sentences/{pos}/tokens/{ti}"),
                    format!("token {tok:?} is empty or contains whitespace"),
                ));
            }
        }
        flat.extend(sent.tokens.iter().map(String::as_str));
    }

    let expected = tokenize_strs(&rs.raw_text);
    if expected != flat {
        let at = expected
            .iter()
            .zip(flat.iter())
            .position(|(a, b)| a != b)
            .unwrap_or(expected.len().min(flat.len()));
        return Err(invalid(
            &format!("{base}/sentences"),
            format!(
                "sentence tokens do not match the tokenized raw_text at token {at} (raw_text gives {:?}, sentences give {:?})",
                expected.get(at),
                flat.get(at)
            ),
        ));
    }

    for (pos, sent) in rs.sentences.into_iter().enumerate() {
        sentences.push(Sentence {
            scenario_id: rs.id.clone(),
            sentence_index: pos,
            tokens: sent
                .tokens
                .into_iter()
                .enumerate()
                .map(|(index, text)| Token { text, index })
                .collect(),
        });
    }
    Ok(Scenario {
        id: rs.id,
        app_name: rs.app_name,
        raw_text: rs.raw_text,
        sentences,
    })
}

fn resolve_annotation(
    corpus: &Corpus,
    ra: RawAnnotation,
    scenario_id: String,
    base: &str,
    forbid_overlap: bool,
) -> Result<ActionAnnotation, CorpusError> {
    let Some(scenario) = corpus.scenario(&scenario_id) else {
        return Err(CorpusError::DanglingReference {
            pointer: format!("{base}/scenario_id"),
            detail: format!("unknown scenario {scenario_id:?}"),
        });
    };
    let Some(sentence) = scenario.sentences.get(ra.sentence_index) else {
        return Err(CorpusError::DanglingReference {
            pointer: format!("{base}/sentence_index"),
            detail: format!(
                "scenario {scenario_id:?} has {} sentences, no index {}",
                scenario.sentences.len(),
                ra.sentence_index
            ),
        });
    };
    let n = sentence.len();
    if !ra.verb_range.fits(n) {
        return Err(CorpusError::OutOfRange {
            pointer: format!("{base}/verb_range"),
            detail: format!("verb range {} on a {n}-token sentence", ra.verb_range),
        });
    }
    for (gi, arg) in ra.arguments.iter().enumerate() {
        if !arg.range.fits(n) {
            return Err(CorpusError::OutOfRange {
                pointer: format!("{base}/arguments/{gi}/range"),
                detail: format!("argument range {} on a {n}-token sentence", arg.range),
            });
        }
        if forbid_overlap && arg.range.overlaps(&ra.verb_range) {
            return Err(invalid(
                &format!("{base}/arguments/{gi}/range"),
                format!("argument range {} overlaps verb range {}", arg.range, ra.verb_range),
            ));
        }
    }
    let actor_name = match (ra.actor, ra.actor_name) {
        (Actor::External, Some(name)) if !name.trim().is_empty() => Some(name),
        (Actor::External, _) => {
            return Err(invalid(
                &format!("{base}/actor_name"),
                "actor_name is required when actor is external".into(),
            ))
        }
        (_, name) => name,
    };
    let verb_lemma = match ra.verb_lemma {
        Some(l) if !l.trim().is_empty() => l.trim().to_string(),
        _ => fallback_lemma(&sentence.surface(ra.verb_range)),
    };
    Ok(ActionAnnotation {
        scenario_id,
        sentence_index: ra.sentence_index,
        verb_range: ra.verb_range,
        verb_lemma,
        category: ra.category,
        actor: ra.actor,
        actor_name,
        arguments: ra
            .arguments
            .into_iter()
            .map(|a| ArgumentSpan { kind: a.kind, range: a.range })
            .collect(),
    })
}

fn invalid(pointer: &str, detail: String) -> CorpusError {
    CorpusError::Invalid {
        pointer: pointer.to_string(),
        detail,
    }
}
