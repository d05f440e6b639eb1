//! Choice-reordering perturbations, prompt rendering and answer parsing.
//!
//! A [`Permutation`] lists, for each displayed position, the original option
//! shown there: position `j` displays `options[perm[j]]`. [`depermute`] maps
//! a chosen position back to the original option and [`permute`] goes the
//! other way.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CatError, Result};
use crate::record::{option_letter, AnswerRecord};
use crate::synthetic::derive_seed;

pub const PROMPT_TEMPLATE: &str = "Answer the following multiple choice questions. \n\
The first line of your response should be: \n\
'LETTER' (without quotes), followed \n\
by a step-by-step explanation.\n\
\n\
Question: $QUESTION$\n\
Choices: $CHOICES$\n\
Answer:";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McQuestion {
    pub question_id: String,
    pub stem: String,
    pub options: Vec<String>,
    pub correct_index: usize,
}

impl McQuestion {
    pub fn validate(&self) -> Result<()> {
        if self.options.len() < 2 {
            return Err(CatError::InvalidQuestion(format!(
                "{:?} has {} options, need at least 2",
                self.question_id,
                self.options.len()
            )));
        }
        if self.options.iter().any(|o| o.trim().is_empty()) {
            return Err(CatError::InvalidQuestion(format!(
                "{:?} has an empty option",
                self.question_id
            )));
        }
        if self.correct_index >= self.options.len() {
            return Err(CatError::IndexOutOfRange {
                index: self.correct_index,
                option_count: self.options.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; order.len()];
        for &i in &order {
            if i >= order.len() || std::mem::replace(&mut seen[i], true) {
                return Err(CatError::InvalidPermutation(format!("{order:?}")));
            }
        }
        Ok(Self(order))
    }

    pub fn identity(k: usize) -> Self {
        Self((0..k).collect())
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(j, &i)| i == j)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// All K! permutations in lexicographic order.
    pub fn all(k: usize) -> Vec<Permutation> {
        fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Permutation>) {
            if prefix.len() == used.len() {
                out.push(Permutation(prefix.clone()));
                return;
            }
            for i in 0..used.len() {
                if !used[i] {
                    used[i] = true;
                    prefix.push(i);
                    rec(prefix, used, out);
                    prefix.pop();
                    used[i] = false;
                }
            }
        }
        let mut out = Vec::new();
        rec(&mut Vec::with_capacity(k), &mut vec![false; k], &mut out);
        out
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = CatError;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.0
    }
}

/// Original option shown at `position`.
pub fn depermute(position: usize, perm: &Permutation) -> Result<usize> {
    perm.0
        .get(position)
        .copied()
        .ok_or(CatError::IndexOutOfRange {
            index: position,
            option_count: perm.len(),
        })
}

/// Displayed position of original option `option`.
pub fn permute(option: usize, perm: &Permutation) -> Result<usize> {
    perm.0
        .iter()
        .position(|&i| i == option)
        .ok_or(CatError::IndexOutOfRange {
            index: option,
            option_count: perm.len(),
        })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantPlan {
    pub question_id: String,
    pub permutations: Vec<Permutation>,
    pub seed: u64,
}

fn factorial(k: usize) -> Option<u64> {
    (1..=k as u64).try_fold(1u64, |acc, i| acc.checked_mul(i))
}

/// FNV-1a, so per-question streams depend on the id rather than file order.
fn stable_hash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Identity first, then `m − 1` random reorderings, distinct while K! allows.
pub fn make_variants(q: &McQuestion, m: usize, seed: u64) -> Result<VariantPlan> {
    q.validate()?;
    if m == 0 {
        return Err(CatError::InvalidSpec("need at least one variant".into()));
    }
    let k = q.options.len();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, stable_hash(&q.question_id)));
    let identity = Permutation::identity(k);
    let mut permutations = vec![identity.clone()];

    let distinct_available = factorial(k).is_none_or(|f| f >= m as u64);
    if distinct_available {
        let mut seen: HashSet<Permutation> = HashSet::from([identity]);
        while permutations.len() < m {
            let mut order: Vec<usize> = (0..k).collect();
            order.shuffle(&mut rng);
            let p = Permutation(order);
            if seen.insert(p.clone()) {
                permutations.push(p);
            }
        }
    } else {
        let mut rest: Vec<Permutation> = Permutation::all(k)
            .into_iter()
            .filter(|p| !p.is_identity())
            .collect();
        rest.shuffle(&mut rng);
        permutations.extend(rest);
        while permutations.len() < m {
            let mut order: Vec<usize> = (0..k).collect();
            order.shuffle(&mut rng);
            permutations.push(Permutation(order));
        }
    }
    Ok(VariantPlan {
        question_id: q.question_id.clone(),
        permutations,
        seed,
    })
}

pub fn render_prompt(q: &McQuestion, perm: &Permutation) -> Result<String> {
    let k = q.options.len();
    if k > 26 {
        return Err(CatError::LabelsExhausted(k));
    }
    if perm.len() != k {
        return Err(CatError::InvalidPermutation(format!(
            "{} entries for {k} options",
            perm.len()
        )));
    }
    let choices = perm
        .as_slice()
        .iter()
        .enumerate()
        .map(|(pos, &opt)| format!("{}. {}", option_letter(pos).unwrap_or('?'), q.options[opt]))
        .collect::<Vec<_>>()
        .join("\n");
    Ok(PROMPT_TEMPLATE
        .replace("$QUESTION$", &q.stem)
        .replace("$CHOICES$", &choices))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParseRule {
    /// Found on the first non-empty line, the requested format.
    FirstLine,
    /// Found by scanning the rest of the response.
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParsedAnswer {
    pub index: usize,
    pub rule: ParseRule,
}

/// First standalone in-range capital letter in `line`. "A" or "I" followed by
/// a space and a lowercase word reads as prose and is skipped.
fn find_label(line: &str, k: usize) -> Option<usize> {
    let chars: Vec<char> = line.chars().collect();
    let last = (b'A' + k.min(26) as u8 - 1) as char;
    (0..chars.len()).find_map(|i| {
        let c = chars[i];
        if !('A'..=last).contains(&c) {
            return None;
        }
        let before = i.checked_sub(1).map(|p| chars[p]);
        let after = chars.get(i + 1).copied();
        if before.is_some_and(|b| b.is_alphanumeric()) || after.is_some_and(|a| a.is_alphanumeric())
        {
            return None;
        }
        let prose = matches!(c, 'A' | 'I')
            && after == Some(' ')
            && chars.get(i + 2).is_some_and(|n| n.is_lowercase());
        (!prose).then(|| (c as u8 - b'A') as usize)
    })
}

/// Extracts the chosen option index (in displayed order) from a raw reply.
pub fn parse_answer(raw: &str, k: usize) -> Option<ParsedAnswer> {
    if k == 0 {
        return None;
    }
    let mut lines = raw.lines().skip_while(|l| l.trim().is_empty());
    if let Some(index) = lines.next().and_then(|l| find_label(l, k)) {
        return Some(ParsedAnswer {
            index,
            rule: ParseRule::FirstLine,
        });
    }
    lines
        .find_map(|l| find_label(l, k))
        .map(|index| ParsedAnswer {
            index,
            rule: ParseRule::Fallback,
        })
}

/// One prompt of a perturbation batch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub question_id: String,
    pub variant_id: String,
    pub is_original: bool,
    pub option_count: usize,
    /// Correct option in the original ordering.
    pub correct_option: usize,
    pub permutation: Permutation,
    pub prompt_file: String,
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(reader: impl BufRead, what: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CatError::io(format!("<{what}>"), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| CatError::MalformedLine {
            line: idx + 1,
            message: format!("{what}: {e}"),
        })?;
        out.push(item);
    }
    Ok(out)
}

/// Reads questions (`question_id`, `stem`, `options`, `correct_index`).
pub fn read_questions(reader: impl BufRead) -> Result<Vec<McQuestion>> {
    let questions: Vec<McQuestion> = read_jsonl(reader, "question")?;
    let mut seen = HashSet::new();
    for (i, q) in questions.iter().enumerate() {
        q.validate().map_err(|e| CatError::InvalidRecord {
            line: i + 1,
            message: e.to_string(),
        })?;
        if !seen.insert(q.question_id.as_str()) {
            return Err(CatError::DuplicateQuestion(q.question_id.clone()));
        }
    }
    Ok(questions)
}

pub fn read_manifest(reader: impl BufRead) -> Result<Vec<ManifestEntry>> {
    read_jsonl(reader, "manifest")
}

fn variant_width(m: usize) -> usize {
    m.saturating_sub(1).max(1).to_string().len()
}

/// Plans and renders every variant of every question.
pub fn perturb_questions(
    questions: &[McQuestion],
    m: usize,
    seed: u64,
) -> Result<Vec<(ManifestEntry, String)>> {
    let vw = variant_width(m);
    let mut out = Vec::with_capacity(questions.len() * m);
    for q in questions {
        let plan = make_variants(q, m, seed)?;
        for (j, perm) in plan.permutations.into_iter().enumerate() {
            let variant_id = format!("v{j:0vw$}");
            let prompt = render_prompt(q, &perm)?;
            out.push((
                ManifestEntry {
                    prompt_file: format!("{}__{}.txt", q.question_id, variant_id),
                    question_id: q.question_id.clone(),
                    variant_id,
                    is_original: j == 0,
                    option_count: q.options.len(),
                    correct_option: q.correct_index,
                    permutation: perm,
                },
                prompt,
            ));
        }
    }
    Ok(out)
}

/// Writes `prompts/<question>__<variant>.txt` and `manifest.jsonl` under `out_dir`.
pub fn write_perturbation(
    questions: &[McQuestion],
    m: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<Vec<ManifestEntry>> {
    let batch = perturb_questions(questions, m, seed)?;
    let prompt_dir = out_dir.join("prompts");
    fs::create_dir_all(&prompt_dir).map_err(|e| CatError::io(&prompt_dir, e))?;
    let manifest_path = out_dir.join("manifest.jsonl");
    let mut manifest = Vec::new();
    let mut entries = Vec::with_capacity(batch.len());
    for (entry, prompt) in batch {
        let path = prompt_dir.join(&entry.prompt_file);
        fs::write(&path, prompt).map_err(|e| CatError::io(&path, e))?;
        writeln!(manifest, "{}", serde_json::to_string(&entry)?)
            .map_err(|e| CatError::io(&manifest_path, e))?;
        entries.push(entry);
    }
    fs::write(&manifest_path, manifest).map_err(|e| CatError::io(&manifest_path, e))?;
    Ok(entries)
}

/// An externally collected model reply to one prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseLine {
    pub question_id: String,
    pub variant_id: String,
    pub raw_response: String,
}

pub fn read_responses(reader: impl BufRead) -> Result<Vec<ResponseLine>> {
    read_jsonl(reader, "response")
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ParseStats {
    pub first_line: usize,
    pub fallback: usize,
    pub unparsed: usize,
    /// Manifest entries with no collected response.
    pub missing: usize,
}

/// Parses replies and maps them back to original option indices, producing
/// one record per manifest entry in manifest order.
pub fn responses_to_records(
    manifest: &[ManifestEntry],
    responses: &[ResponseLine],
) -> Result<(Vec<AnswerRecord>, ParseStats)> {
    let mut by_key: HashMap<(&str, &str), &ResponseLine> = HashMap::new();
    for r in responses {
        by_key.insert((r.question_id.as_str(), r.variant_id.as_str()), r);
    }
    let known: HashSet<(&str, &str)> = manifest
        .iter()
        .map(|e| (e.question_id.as_str(), e.variant_id.as_str()))
        .collect();
    if let Some(r) = responses
        .iter()
        .find(|r| !known.contains(&(r.question_id.as_str(), r.variant_id.as_str())))
    {
        return Err(CatError::InvalidRecord {
            line: 0,
            message: format!(
                "response for unknown variant ({:?}, {:?})",
                r.question_id, r.variant_id
            ),
        });
    }

    let mut stats = ParseStats::default();
    let mut records = Vec::with_capacity(manifest.len());
    for e in manifest {
        let response = by_key.get(&(e.question_id.as_str(), e.variant_id.as_str()));
        let parsed = response.and_then(|r| parse_answer(&r.raw_response, e.option_count));
        match (response, parsed) {
            (None, _) => stats.missing += 1,
            (Some(_), None) => stats.unparsed += 1,
            (Some(_), Some(p)) if p.rule == ParseRule::FirstLine => stats.first_line += 1,
            (Some(_), Some(_)) => stats.fallback += 1,
        }
        let predicted_option = parsed
            .map(|p| depermute(p.index, &e.permutation))
            .transpose()?;
        records.push(AnswerRecord {
            question_id: e.question_id.clone(),
            variant_id: e.variant_id.clone(),
            is_original: e.is_original,
            option_count: e.option_count,
            correct_option: e.correct_option,
            predicted_option,
            raw_response: response.map(|r| r.raw_response.clone()),
            soft_score: None,
        });
    }
    Ok((records, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn question(k: usize) -> McQuestion {
        McQuestion {
            question_id: "q1".into(),
            stem: "Pick one".into(),
            options: (0..k).map(|i| format!("opt{i}")).collect(),
            correct_index: 0,
        }
    }

    #[test]
    fn four_options_ten_distinct_variants() {
        let plan = make_variants(&question(4), 10, 1).unwrap();
        assert_eq!(plan.permutations.len(), 10);
        assert!(plan.permutations[0].is_identity());
        let distinct: HashSet<_> = plan.permutations.iter().collect();
        assert_eq!(distinct.len(), 10);
    }

    #[test]
    fn two_options_exhaust_then_repeat() {
        let plan = make_variants(&question(2), 10, 1).unwrap();
        assert_eq!(plan.permutations.len(), 10);
        assert!(plan.permutations[0].is_identity());
        assert_eq!(plan.permutations[1].as_slice(), &[1, 0]);
    }

    #[test]
    fn three_options_cover_all_six_first() {
        let plan = make_variants(&question(3), 10, 4).unwrap();
        let first: HashSet<_> = plan.permutations[..6].iter().collect();
        assert_eq!(first.len(), 6);
    }

    #[test]
    fn plans_are_deterministic() {
        let a = make_variants(&question(5), 10, 99).unwrap();
        let b = make_variants(&question(5), 10, 99).unwrap();
        let c = make_variants(&question(5), 10, 100).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn prompt_substitution() {
        let q = McQuestion {
            question_id: "q".into(),
            stem: "2+2?".into(),
            options: vec!["4".into(), "5".into()],
            correct_index: 0,
        };
        let p = render_prompt(&q, &Permutation::identity(2)).unwrap();
        assert!(p.contains("Question: 2+2?\n"));
        assert!(p.contains("Choices: A. 4\nB. 5\nAnswer:"));
        assert!(p.starts_with("Answer the following multiple choice questions. \n"));
        let swapped = render_prompt(&q, &Permutation::new(vec![1, 0]).unwrap()).unwrap();
        assert!(swapped.contains("A. 5\nB. 4"));
    }

    #[test]
    fn prompt_label_exhaustion() {
        let q = question(27);
        assert!(matches!(
            render_prompt(&q, &Permutation::identity(27)),
            Err(CatError::LabelsExhausted(27))
        ));
    }

    #[test]
    fn parse_examples() {
        assert_eq!(
            parse_answer("B\nBecause it is", 4),
            Some(ParsedAnswer {
                index: 1,
                rule: ParseRule::FirstLine
            })
        );
        assert_eq!(
            parse_answer("'C' — explanation", 5).map(|p| p.index),
            Some(2)
        );
        assert_eq!(parse_answer("The answer is unclear.", 4), None);
        assert_eq!(parse_answer("E", 4), None);
        let fb = parse_answer("Let me think.\nSo the answer is D.", 4).unwrap();
        assert_eq!((fb.index, fb.rule), (3, ParseRule::Fallback));
    }

    #[test]
    fn depermute_examples() {
        let p = Permutation::new(vec![2, 0, 1]).unwrap();
        assert_eq!(depermute(0, &p).unwrap(), 2);
        assert_eq!(permute(2, &p).unwrap(), 0);
        assert!(depermute(3, &p).is_err());
        let id = Permutation::identity(4);
        assert!((0..4).all(|j| depermute(j, &id).unwrap() == j));
    }

    #[test]
    fn permutation_validation() {
        assert!(Permutation::new(vec![0, 0]).is_err());
        assert!(Permutation::new(vec![0, 2]).is_err());
        assert_eq!(Permutation::all(4).len(), 24);
    }

    #[test]
    fn question_file_errors_carry_line() {
        let text = "{\"question_id\":\"a\",\"stem\":\"s\",\"options\":[\"x\",\"y\"],\"correct_index\":1}\n{\"question_id\":\"b\",\"stem\":\"s\",\"options\":[\"x\",\"y\"]}\n";
        match read_questions(text.as_bytes()) {
            Err(CatError::MalformedLine { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("correct_index"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn records_from_responses() {
        let q = question(3);
        let batch = perturb_questions(&[q], 3, 5).unwrap();
        let manifest: Vec<_> = batch.into_iter().map(|(e, _)| e).collect();
        let responses = vec![
            ResponseLine {
                question_id: "q1".into(),
                variant_id: manifest[0].variant_id.clone(),
                raw_response: "A\nbecause".into(),
            },
            ResponseLine {
                question_id: "q1".into(),
                variant_id: manifest[1].variant_id.clone(),
                raw_response: "no idea".into(),
            },
        ];
        let (records, stats) = responses_to_records(&manifest, &responses).unwrap();
        assert_eq!(records.len(), 3);
        assert_eq!(records[0].predicted_option, Some(0));
        assert_eq!(records[1].predicted_option, None);
        assert_eq!(records[2].raw_response, None);
        assert_eq!(
            stats,
            ParseStats {
                first_line: 1,
                fallback: 0,
                unparsed: 1,
                missing: 1
            }
        );
        let stray = vec![ResponseLine {
            question_id: "zz".into(),
            variant_id: "v0".into(),
            raw_response: "A".into(),
        }];
        assert!(responses_to_records(&manifest, &stray).is_err());
    }
}
