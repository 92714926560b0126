use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::{tokenize, McqInstance, QuestionType};
use crate::error::{Error, Result};

/// On-disk dataset layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetFormat {
    /// One `{id, passage, question, candidates, answer}` object per line.
    NativeJsonl,
    /// RACE layout: a JSON file (or a directory tree of them) with
    /// `{id, article, questions[], options[][], answers[]}`.
    RaceJson,
    /// SemEval-2018 Task 11 layout converted to JSON:
    /// `{instances: [{id, text, questions: [{id, text, answers: [{text, correct}]}]}]}`.
    SemevalJson,
}

impl std::str::FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "native-jsonl" | "jsonl" => Ok(DatasetFormat::NativeJsonl),
            "race-json" | "race" => Ok(DatasetFormat::RaceJson),
            "semeval-json" | "semeval" => Ok(DatasetFormat::SemevalJson),
            other => Err(format!("unknown dataset format `{other}`")),
        }
    }
}

/// Maximum token counts per stream; longer streams are truncated on load.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub passage: usize,
    pub question: usize,
    pub candidate: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            passage: 300,
            question: 20,
            candidate: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum AnswerField {
    Index(usize),
    Letter(String),
}

#[derive(Debug, Serialize, Deserialize)]
struct NativeRecord {
    id: String,
    passage: String,
    question: String,
    candidates: Vec<String>,
    answer: AnswerField,
}

#[derive(Debug, Deserialize)]
struct RaceRecord {
    #[serde(default)]
    id: Option<String>,
    article: String,
    questions: Vec<String>,
    options: Vec<Vec<String>>,
    answers: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum SemevalFile {
    Wrapped { instances: Vec<SemevalInstance> },
    Bare(Vec<SemevalInstance>),
}

#[derive(Debug, Deserialize)]
struct SemevalInstance {
    id: String,
    text: String,
    questions: Vec<SemevalQuestion>,
}

#[derive(Debug, Deserialize)]
struct SemevalQuestion {
    #[serde(default)]
    id: Option<String>,
    text: String,
    answers: Vec<SemevalAnswer>,
}

#[derive(Debug, Deserialize)]
struct SemevalAnswer {
    text: String,
    #[serde(deserialize_with = "bool_or_string")]
    correct: bool,
}

fn bool_or_string<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<bool, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum B {
        Bool(bool),
        Str(String),
    }
    match B::deserialize(d)? {
        B::Bool(b) => Ok(b),
        B::Str(s) => match s.to_ascii_lowercase().as_str() {
            "true" => Ok(true),
            "false" => Ok(false),
            other => Err(serde::de::Error::custom(format!("expected True/False, got `{other}`"))),
        },
    }
}

/// Raw text of one question before tokenization and validation.
struct RawItem {
    id: String,
    passage: String,
    question: String,
    candidates: Vec<String>,
    answer: AnswerField,
}

/// Maps `A`, `B`, … to 0, 1, …
fn letter_index(letter: &str, index: usize) -> Result<usize> {
    let mut chars = letter.trim().chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) if c.is_ascii_uppercase() => Ok((c as u8 - b'A') as usize),
        _ => Err(Error::Record {
            index,
            msg: format!("answer `{letter}` is not a candidate letter"),
        }),
    }
}

fn truncate(mut tokens: Vec<String>, max: usize) -> Vec<String> {
    tokens.truncate(max);
    tokens
}

fn build_instance(raw: RawItem, index: usize, limits: &Limits) -> Result<McqInstance> {
    let n = raw.candidates.len();
    if n < 2 {
        return Err(Error::Validation {
            index,
            msg: format!("{n} candidate(s); at least two are required"),
        });
    }
    let answer = match &raw.answer {
        AnswerField::Index(i) => *i,
        AnswerField::Letter(l) => letter_index(l, index)?,
    };
    if answer >= n {
        return Err(Error::Validation {
            index,
            msg: format!("answer {:?} outside the {n} candidates", raw.answer),
        });
    }
    let question = tokenize(&raw.question);
    let qtype = QuestionType::classify(&question);
    let inst = McqInstance {
        id: raw.id,
        passage: truncate(tokenize(&raw.passage), limits.passage),
        question: truncate(question, limits.question),
        candidates: raw
            .candidates
            .iter()
            .map(|c| truncate(tokenize(c), limits.candidate))
            .collect(),
        answer,
        qtype,
    };
    if inst.passage.is_empty() || inst.question.is_empty() {
        return Err(Error::Validation {
            index,
            msg: format!("instance `{}` has an empty passage or question", inst.id),
        });
    }
    Ok(inst)
}

/// Loads and validates a dataset, truncating every stream to `limits`.
///
/// The question type is derived from the full (untruncated) question. All
/// instances must share one candidate count.
pub fn load_dataset(path: &Path, format: DatasetFormat, limits: &Limits) -> Result<Vec<McqInstance>> {
    let raw = match format {
        DatasetFormat::NativeJsonl => read_native(path)?,
        DatasetFormat::RaceJson => read_race(path)?,
        DatasetFormat::SemevalJson => read_semeval(path)?,
    };
    let mut out = Vec::with_capacity(raw.len());
    for (index, item) in raw.into_iter().enumerate() {
        let inst = build_instance(item, index, limits)?;
        if let Some(first) = out.first().map(|f: &McqInstance| f.num_candidates()) {
            if inst.num_candidates() != first {
                return Err(Error::Validation {
                    index,
                    msg: format!("{} candidates where the dataset uses {first}", inst.num_candidates()),
                });
            }
        }
        out.push(inst);
    }
    Ok(out)
}

fn read_native(path: &Path) -> Result<Vec<RawItem>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut items = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let index = items.len();
        let rec: NativeRecord = serde_json::from_str(&line).map_err(|e| Error::Record {
            index,
            msg: format!("{}: {e}", path.display()),
        })?;
        items.push(RawItem {
            id: rec.id,
            passage: rec.passage,
            question: rec.question,
            candidates: rec.candidates,
            answer: rec.answer,
        });
    }
    Ok(items)
}

fn json_files(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files = Vec::new();
    for entry in WalkDir::new(path).sort_by_file_name() {
        let entry = entry.map_err(|e| std::io::Error::other(e.to_string()))?;
        let is_data = entry
            .path()
            .extension()
            .is_some_and(|e| e == "json" || e == "txt");
        if entry.file_type().is_file() && is_data {
            files.push(entry.into_path());
        }
    }
    Ok(files)
}

fn read_race(path: &Path) -> Result<Vec<RawItem>> {
    let mut items = Vec::new();
    for (file_no, file) in json_files(path)?.into_iter().enumerate() {
        let index = items.len();
        let text = fs::read_to_string(&file)?;
        let rec: RaceRecord = serde_json::from_str(&text).map_err(|e| Error::Record {
            index,
            msg: format!("{}: {e}", file.display()),
        })?;
        if rec.questions.len() != rec.options.len() || rec.questions.len() != rec.answers.len() {
            return Err(Error::Record {
                index,
                msg: format!("{}: questions, options and answers differ in length", file.display()),
            });
        }
        let base = rec.id.unwrap_or_else(|| {
            file.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| format!("race{file_no}"))
        });
        for (q, ((question, options), answer)) in rec.questions.into_iter().zip(rec.options).zip(rec.answers).enumerate() {
            items.push(RawItem {
                id: format!("{base}-{q}"),
                passage: rec.article.clone(),
                question,
                candidates: options,
                answer: AnswerField::Letter(answer),
            });
        }
    }
    Ok(items)
}

fn read_semeval(path: &Path) -> Result<Vec<RawItem>> {
    let text = fs::read_to_string(path)?;
    let file: SemevalFile = serde_json::from_str(&text).map_err(|e| Error::Record {
        index: 0,
        msg: format!("{}: {e}", path.display()),
    })?;
    let instances = match file {
        SemevalFile::Wrapped { instances } | SemevalFile::Bare(instances) => instances,
    };
    let mut items = Vec::new();
    for inst in instances {
        for (q, question) in inst.questions.into_iter().enumerate() {
            let index = items.len();
            let correct: Vec<usize> = question
                .answers
                .iter()
                .enumerate()
                .filter(|(_, a)| a.correct)
                .map(|(i, _)| i)
                .collect();
            let [answer] = correct[..] else {
                return Err(Error::Validation {
                    index,
                    msg: format!("{} answers marked correct, expected exactly one", correct.len()),
                });
            };
            items.push(RawItem {
                id: format!("{}-{}", inst.id, question.id.unwrap_or_else(|| q.to_string())),
                passage: inst.text.clone(),
                question: question.text,
                candidates: question.answers.into_iter().map(|a| a.text).collect(),
                answer: AnswerField::Index(answer),
            });
        }
    }
    Ok(items)
}

/// Writes instances as native jsonl with space-joined tokens.
pub fn save_native_jsonl(path: &Path, instances: &[McqInstance]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for inst in instances {
        let rec = NativeRecord {
            id: inst.id.clone(),
            passage: inst.passage.join(" "),
            question: inst.question.join(" "),
            candidates: inst.candidates.iter().map(|c| c.join(" ")).collect(),
            answer: AnswerField::Index(inst.answer),
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        let mut f = fs::File::create(&p).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn race_letters_map_to_indices() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "r.json",
            r#"{"id":"m1.txt","article":"A short text about breakfast.","questions":["What is it about?","Which meal?","Who ate?","When?"],
                "options":[["a","b","c","d"],["a","b","c","d"],["a","b","c","d"],["a","b","c","d"]],"answers":["A","B","C","D"]}"#,
        );
        let ds = load_dataset(&p, DatasetFormat::RaceJson, &Limits::default()).unwrap();
        assert_eq!(ds.iter().map(|i| i.answer).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
        assert_eq!(ds[0].id, "m1.txt-0");
        assert_eq!(ds[1].qtype, QuestionType::Which);
    }

    #[test]
    fn race_directory_is_walked_in_name_order() {
        let dir = tempfile::tempdir().unwrap();
        let sub = dir.path().join("high");
        fs::create_dir(&sub).unwrap();
        let rec = |id: &str| {
            format!(r#"{{"id":"{id}","article":"text","questions":["why?"],"options":[["x","y","z","w"]],"answers":["B"]}}"#)
        };
        write(&sub, "2.txt", &rec("two"));
        write(&sub, "1.txt", &rec("one"));
        write(dir.path(), "notes.md", "ignored");
        let ds = load_dataset(dir.path(), DatasetFormat::RaceJson, &Limits::default()).unwrap();
        assert_eq!(ds.iter().map(|i| i.id.as_str()).collect::<Vec<_>>(), vec!["one-0", "two-0"]);
    }

    #[test]
    fn semeval_correct_flag() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "s.json",
            r#"{"instances":[{"id":"7","text":"I filled the kettle with water.","questions":[
                {"id":"0","text":"Why did they use a kettle?","answers":[{"text":"to drink from","correct":"False"},{"text":"to boil water","correct":"True"}]}]}]}"#,
        );
        let ds = load_dataset(&p, DatasetFormat::SemevalJson, &Limits::default()).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds[0].answer, 1);
        assert_eq!(ds[0].num_candidates(), 2);
        assert_eq!(ds[0].qtype, QuestionType::Why);
        assert_eq!(ds[0].candidates[1], vec!["to", "boil", "water"]);
    }

    #[test]
    fn answer_out_of_range_is_validation_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "bad.jsonl",
            "{\"id\":\"a\",\"passage\":\"p q\",\"question\":\"what\",\"candidates\":[\"x\",\"y\"],\"answer\":0}\n\
             {\"id\":\"b\",\"passage\":\"p q\",\"question\":\"what\",\"candidates\":[\"x\",\"y\"],\"answer\":\"C\"}\n",
        );
        let err = load_dataset(&p, DatasetFormat::NativeJsonl, &Limits::default()).unwrap_err();
        assert!(matches!(err, Error::Validation { index: 1, .. }), "{err}");
    }

    #[test]
    fn malformed_record_reports_index() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "bad.jsonl",
            "{\"id\":\"a\",\"passage\":\"p\",\"question\":\"q\",\"candidates\":[\"x\",\"y\"],\"answer\":1}\n{\"id\":\"b\",\"passage\":3}\n",
        );
        let err = load_dataset(&p, DatasetFormat::NativeJsonl, &Limits::default()).unwrap_err();
        assert!(matches!(err, Error::Record { index: 1, .. }), "{err}");
    }

    #[test]
    fn mixed_candidate_counts_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "mixed.jsonl",
            "{\"id\":\"a\",\"passage\":\"p\",\"question\":\"q\",\"candidates\":[\"x\",\"y\"],\"answer\":1}\n\
             {\"id\":\"b\",\"passage\":\"p\",\"question\":\"q\",\"candidates\":[\"x\",\"y\",\"z\"],\"answer\":1}\n",
        );
        assert!(matches!(
            load_dataset(&p, DatasetFormat::NativeJsonl, &Limits::default()),
            Err(Error::Validation { index: 1, .. })
        ));
    }

    #[test]
    fn truncation_keeps_answer_and_qtype() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "t.jsonl",
            "{\"id\":\"a\",\"passage\":\"one two three four five\",\"question\":\"is it so, and why\",\"candidates\":[\"x y z\",\"u v w\"],\"answer\":1}\n",
        );
        let limits = Limits {
            passage: 3,
            question: 2,
            candidate: 1,
        };
        let ds = load_dataset(&p, DatasetFormat::NativeJsonl, &limits).unwrap();
        assert_eq!(ds[0].passage, vec!["one", "two", "three"]);
        assert_eq!(ds[0].question, vec!["is", "it"]);
        assert_eq!(ds[0].candidates, vec![vec!["x"], vec!["u"]]);
        assert_eq!(ds[0].answer, 1);
        assert_eq!(ds[0].qtype, QuestionType::Why);
    }
}
