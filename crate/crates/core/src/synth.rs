//! Seeded synthetic review histories with author labels.
//!
//! Each inline comment carries a hidden verdict. Useful comments ask for a
//! concrete edit, name code from the surrounding context and see that line
//! rewritten in the next patchset; the others are acknowledgements or vague
//! remarks on code nobody touches afterwards. Labels agree with the hidden
//! verdict except for a `noise` fraction, which is flipped.

use std::collections::BTreeMap;

use chrono::{Duration, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::{ReviewDump, FORMAT_VERSION};
use crate::model::{
    ChangeStatus, CommentCategory, CommentThread, Developer, FileDiff, Patchset, Project, ReviewChange,
    ReviewComment, Timestamp, UsefulnessLabel,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub comments: usize,
    pub useful_rate: f64,
    pub noise: f64,
    pub developers: usize,
    pub projects: usize,
    pub start: Timestamp,
    /// Changes are spread uniformly over this many days after `start`.
    pub days: u32,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            comments: 200,
            useful_rate: 0.81,
            noise: 0.1,
            developers: 8,
            projects: 3,
            start: Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap(),
            days: 120,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticHistory {
    pub dump: ReviewDump,
    pub labels: Vec<UsefulnessLabel>,
    /// Verdict before label noise.
    pub truth: BTreeMap<String, bool>,
}

const IDENTS: [&str; 10] = [
    "fooBar", "parseHeader", "retry_count", "bufferSize", "user_id", "maxLen", "cacheKey", "open_file",
    "tmpPath", "writeAll",
];

const USEFUL: [&str; 8] = [
    "Please rename {id} so the intent is clear.",
    "{id} can be null here. Add a check before using it.",
    "This leaks {id} when the call fails. Close it in the error path.",
    "Move {id} out of the loop, it is recomputed every iteration.",
    "Use a constant instead of the magic number next to {id}.",
    "{id} is never validated. Reject negative values.",
    "Is {id} guarded against overflow? Please add a bounds check.",
    "Extract the {id} handling into a helper, it is duplicated below.",
];

const NOT_USEFUL: [&str; 8] = [
    "Looks good to me.",
    "Nice work!",
    "Just curious, why?",
    "ok",
    "I wonder if there is another way.",
    "Not sure about this.",
    "Thanks for the update.",
    "Good.",
];

const USEFUL_REPLIES: [&str; 3] = ["Done.", "Fixed, thanks!", "Good catch, updated."];
const OTHER_REPLIES: [&str; 3] = ["Thanks.", "It is fine as is.", "I prefer to keep it."];

const USEFUL_CATEGORIES: [CommentCategory; 4] = [
    CommentCategory::Logical,
    CommentCategory::NamingConvention,
    CommentCategory::Validation,
    CommentCategory::Resource,
];
const OTHER_CATEGORIES: [CommentCategory; 3] =
    [CommentCategory::Praise, CommentCategory::Question, CommentCategory::FalsePositive];

fn code_context(ident: &str) -> String {
    format!("fn handle(input: &str) {{\n    let {ident} = compute(input);\n    if {ident} > 0 {{\n        store({ident});\n    }}\n}}")
}

pub fn generate(config: &SynthConfig) -> SyntheticHistory {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let developers: Vec<Developer> = (0..config.developers.max(2))
        .map(|i| Developer {
            developer_id: format!("dev{i:02}"),
            display_name: format!("Developer {i}"),
        })
        .collect();
    let projects: Vec<Project> = (0..config.projects.max(1))
        .map(|i| Project {
            project_id: format!("proj{i}"),
            name: format!("Project {i}"),
        })
        .collect();

    let mut changes = Vec::new();
    let mut labels = Vec::new();
    let mut truth = BTreeMap::new();
    let mut made = 0;
    while made < config.comments {
        let n = rng.gen_range(1..=4).min(config.comments - made);
        let k = changes.len();
        let author = developers.choose(&mut rng).unwrap().developer_id.clone();
        let project = projects.choose(&mut rng).unwrap().project_id.clone();
        let offset = rng.gen_range(0..config.days.max(1) as i64 * 24 * 60);
        let created = config.start + Duration::minutes(offset);
        let file = format!("src/module{}.rs", rng.gen_range(0..6));
        let first_lines: Vec<u32> = (1..=rng.gen_range(5..40)).collect();
        let mut later_lines = Vec::new();
        let mut threads = Vec::new();

        for t in 0..n {
            let reviewer = loop {
                let d = &developers.choose(&mut rng).unwrap().developer_id;
                if *d != author {
                    break d.clone();
                }
            };
            let useful = rng.gen_bool(config.useful_rate);
            let line = 10 + 40 * t as u32 + rng.gen_range(0..20);
            let ident = IDENTS.choose(&mut rng).unwrap();
            let text = if useful {
                later_lines.push(line + rng.gen_range(0..=3));
                USEFUL.choose(&mut rng).unwrap().replace("{id}", ident)
            } else {
                NOT_USEFUL.choose(&mut rng).unwrap().to_string()
            };
            let thread_id = format!("ch{k:04}-t{t}");
            let comment_id = format!("ch{k:04}-c{t}");
            let written = created + Duration::minutes(rng.gen_range(30..600));
            let mut comments = vec![ReviewComment {
                comment_id: comment_id.clone(),
                thread_id: thread_id.clone(),
                author_id: reviewer,
                written_at: written,
                text,
                patchset_number: 1,
                code_context: Some(code_context(ident)),
            }];
            if rng.gen_bool(0.6) {
                let replies = if useful { &USEFUL_REPLIES } else { &OTHER_REPLIES };
                comments.push(ReviewComment {
                    comment_id: format!("{comment_id}-r"),
                    thread_id: thread_id.clone(),
                    author_id: author.clone(),
                    written_at: written + Duration::minutes(rng.gen_range(5..120)),
                    text: replies.choose(&mut rng).unwrap().to_string(),
                    patchset_number: 1,
                    code_context: None,
                });
            }
            threads.push(CommentThread {
                thread_id,
                file_path: file.clone(),
                line,
                origin_patchset: 1,
                comments,
            });

            let label = useful ^ rng.gen_bool(config.noise);
            let categories: &[CommentCategory] = if label { &USEFUL_CATEGORIES } else { &OTHER_CATEGORIES };
            labels.push(UsefulnessLabel {
                comment_id: comment_id.clone(),
                rater_id: author.clone(),
                is_useful: label,
                category: *categories.choose(&mut rng).unwrap(),
                labeled_at: config.start + Duration::days(config.days as i64 + 1),
            });
            truth.insert(comment_id, useful);
        }
        made += n;

        let mut patchsets = vec![Patchset {
            number: 1,
            uploaded_at: created,
            files: vec![FileDiff {
                path: file.clone(),
                changed_new_lines: first_lines.into_iter().collect(),
            }],
        }];
        // far from every thread, so it never counts as a response
        later_lines.push(400 + rng.gen_range(0..50));
        patchsets.push(Patchset {
            number: 2,
            uploaded_at: created + Duration::days(1),
            files: vec![FileDiff {
                path: file,
                changed_new_lines: later_lines.into_iter().collect(),
            }],
        });
        changes.push(ReviewChange {
            change_id: format!("ch{k:04}"),
            project_id: project,
            author_id: author,
            created_at: created,
            status: if rng.gen_bool(0.8) { ChangeStatus::Merged } else { ChangeStatus::Open },
            patchsets,
            threads,
        });
    }
    changes.sort_by(|a, b| (a.created_at, &a.change_id).cmp(&(b.created_at, &b.change_id)));
    SyntheticHistory {
        dump: ReviewDump {
            format_version: FORMAT_VERSION,
            developers,
            projects,
            changes,
        },
        labels,
        truth,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn valid_and_reproducible() {
        let config = SynthConfig { comments: 300, ..SynthConfig::default() };
        let a = generate(&config);
        a.dump.validate().unwrap();
        assert_eq!(a.labels.len(), 300);
        assert_eq!(a, generate(&config));
        assert_ne!(a, generate(&SynthConfig { seed: 7, ..config }));
        let useful = a.labels.iter().filter(|l| l.is_useful).count() as f64 / 300.0;
        // 0.81·0.9 + 0.19·0.1
        assert!((useful - 0.748).abs() < 0.07, "{useful}");
        let raters_are_authors = a.labels.iter().all(|l| {
            let ch = a.dump.changes.iter().find(|c| c.locate(&l.comment_id).is_some()).unwrap();
            ch.author_id == l.rater_id
        });
        assert!(raters_are_authors);
    }
}
