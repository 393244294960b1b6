//! Label CSV exchange: `comment_id, rater_id, is_useful, category, labeled_at`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::model::{timestamp, CommentCategory, UsefulnessLabel};

pub const HEADER: [&str; 5] = ["comment_id", "rater_id", "is_useful", "category", "labeled_at"];

#[derive(Debug, thiserror::Error)]
pub enum LabelCsvError {
    #[error("label CSV line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("label CSV: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    comment_id: String,
    rater_id: String,
    is_useful: String,
    category: String,
    labeled_at: String,
}

fn parse_bool(raw: &str) -> Option<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "useful" => Some(true),
        "false" | "0" | "no" | "not_useful" => Some(false),
        _ => None,
    }
}

pub fn read_labels<R: Read>(reader: R) -> Result<Vec<UsefulnessLabel>, LabelCsvError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for record in rdr.deserialize::<Row>() {
        let row = record?;
        // header is line 1
        let line = out.len() as u64 + 2;
        let err = |message: String| LabelCsvError::Row { line, message };
        let is_useful = parse_bool(&row.is_useful).ok_or_else(|| err(format!("bad is_useful {:?}", row.is_useful)))?;
        let category: CommentCategory = row.category.parse().map_err(|e: crate::model::UnknownCategory| err(e.to_string()))?;
        let labeled_at = timestamp::parse(&row.labeled_at).map_err(err)?;
        out.push(UsefulnessLabel {
            comment_id: row.comment_id,
            rater_id: row.rater_id,
            is_useful,
            category,
            labeled_at,
        });
    }
    Ok(out)
}

pub fn write_labels<W: Write>(writer: W, labels: &[UsefulnessLabel]) -> Result<(), LabelCsvError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HEADER)?;
    for l in labels {
        w.write_record([
            l.comment_id.as_str(),
            l.rater_id.as_str(),
            if l.is_useful { "true" } else { "false" },
            l.category.as_str(),
            &timestamp::format(&l.labeled_at),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
