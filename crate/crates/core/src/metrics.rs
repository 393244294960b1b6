//! Reviewer and project effectiveness metrics and rankings.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{timestamp, ReviewChange, Timestamp};

/// Default cutoff of the legacy position score.
pub const LEGACY_N: u32 = 30;

/// Half-open time window `[from, to)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Period {
    #[serde(with = "timestamp")]
    pub from: Timestamp,
    #[serde(with = "timestamp")]
    pub to: Timestamp,
}

impl Period {
    pub fn contains(&self, t: Timestamp) -> bool {
        self.from <= t && t < self.to
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Reviewer,
    Project,
}

impl EntityKind {
    pub fn id_column(self) -> &'static str {
        match self {
            EntityKind::Reviewer => "developer_id",
            EntityKind::Project => "project_id",
        }
    }
}

impl FromStr for EntityKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reviewer" | "reviewers" | "developer" => Ok(EntityKind::Reviewer),
            "project" | "projects" => Ok(EntityKind::Project),
            other => Err(format!("unknown entity kind {other:?} (expected reviewer or project)")),
        }
    }
}

/// Reviews (distinct changes), comments and useful comments.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub nr: u32,
    pub nc: u32,
    pub uc: u32,
}

/// `UC / NC`, or 0 without comments.
pub fn cud(uc: u32, nc: u32) -> f64 {
    if nc == 0 {
        0.0
    } else {
        uc as f64 / nc as f64
    }
}

/// `UC / NR`, or 0 without reviews.
pub fn issue_density(uc: u32, nr: u32) -> f64 {
    if nr == 0 {
        0.0
    } else {
        uc as f64 / nr as f64
    }
}

/// `log2(NR + 1) · (CUD + ID)`.
pub fn review_efficiency(nr: u32, nc: u32, uc: u32) -> f64 {
    (nr as f64 + 1.0).log2() * (cud(uc, nc) + issue_density(uc, nr))
}

/// `10·NR + 17·UC − 2·NC`.
pub fn review_impact(nr: u32, nc: u32, uc: u32) -> i64 {
    10 * nr as i64 + 17 * uc as i64 - 2 * nc as i64
}

/// Review comments (comments on someone else's change) written in `period`,
/// with the entity each one is attributed to.
fn review_comments<'a>(
    changes: &'a [ReviewChange],
    period: &'a Period,
    kind: EntityKind,
) -> impl Iterator<Item = (&'a str, &'a ReviewChange, &'a str)> + 'a {
    changes.iter().flat_map(move |ch| {
        ch.comments()
            .filter(move |(_, c)| c.author_id != ch.author_id && period.contains(c.written_at))
            .map(move |(_, c)| {
                let entity = match kind {
                    EntityKind::Reviewer => c.author_id.as_str(),
                    EntityKind::Project => ch.project_id.as_str(),
                };
                (entity, ch, c.comment_id.as_str())
            })
    })
}

/// Counts for every entity with at least one review comment in `period`.
/// A comment is useful if `verdicts` says so; comments without a verdict
/// count towards NC only.
pub fn aggregate_all(
    changes: &[ReviewChange],
    verdicts: &HashMap<String, bool>,
    period: &Period,
    kind: EntityKind,
) -> BTreeMap<String, Counts> {
    let mut out: BTreeMap<String, Counts> = BTreeMap::new();
    let mut reviewed: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for (entity, change, comment_id) in review_comments(changes, period, kind) {
        let c = out.entry(entity.to_string()).or_default();
        c.nc += 1;
        if verdicts.get(comment_id).copied().unwrap_or(false) {
            c.uc += 1;
        }
        reviewed.entry(entity).or_default().insert(&change.change_id);
    }
    for (entity, set) in reviewed {
        if let Some(c) = out.get_mut(entity) {
            c.nr = set.len() as u32;
        }
    }
    out
}

/// Counts for one developer's reviewing activity in `period`.
pub fn aggregate(
    changes: &[ReviewChange],
    verdicts: &HashMap<String, bool>,
    developer_id: &str,
    period: &Period,
) -> Counts {
    aggregate_all(changes, verdicts, period, EntityKind::Reviewer)
        .remove(developer_id)
        .unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewerPeriodMetrics {
    pub entity_id: String,
    pub period: Period,
    pub nr: u32,
    pub nc: u32,
    pub uc: u32,
    pub cud: f64,
    pub id: f64,
    pub re: f64,
    pub ri: i64,
    pub nc_score: u32,
    pub cud_score: u32,
    pub review_score: u32,
}

impl ReviewerPeriodMetrics {
    /// Derived metrics from counts; legacy scores start at 0 until
    /// [`legacy_scores`] fills them.
    pub fn from_counts(entity_id: impl Into<String>, period: Period, c: Counts) -> Self {
        ReviewerPeriodMetrics {
            entity_id: entity_id.into(),
            period,
            nr: c.nr,
            nc: c.nc,
            uc: c.uc,
            cud: cud(c.uc, c.nc),
            id: issue_density(c.uc, c.nr),
            re: review_efficiency(c.nr, c.nc, c.uc),
            ri: review_impact(c.nr, c.nc, c.uc),
            nc_score: 0,
            cud_score: 0,
            review_score: 0,
        }
    }

    pub fn value(&self, key: RankKey) -> f64 {
        match key {
            RankKey::Re => self.re,
            RankKey::Ri => self.ri as f64,
            RankKey::Nc => self.nc as f64,
            RankKey::Nr => self.nr as f64,
            RankKey::Uc => self.uc as f64,
            RankKey::Cud => self.cud,
            RankKey::Id => self.id,
            RankKey::ReviewScore => self.review_score as f64,
        }
    }
}

/// Metrics (with legacy scores) for every active entity in `period`.
pub fn compute(
    changes: &[ReviewChange],
    verdicts: &HashMap<String, bool>,
    period: &Period,
    kind: EntityKind,
    n: u32,
) -> Vec<ReviewerPeriodMetrics> {
    let list = aggregate_all(changes, verdicts, period, kind)
        .into_iter()
        .map(|(id, c)| ReviewerPeriodMetrics::from_counts(id, *period, c))
        .collect();
    legacy_scores(list, n)
}

/// `N + 1 − position` for positions up to `n`, else 0.
pub fn position_score(position: u32, n: u32) -> u32 {
    if position >= 1 && position <= n {
        n + 1 - position
    } else {
        0
    }
}

/// Fills NC, CUD and combined legacy scores from each entity's position in
/// the NC and CUD rankings.
pub fn legacy_scores(mut list: Vec<ReviewerPeriodMetrics>, n: u32) -> Vec<ReviewerPeriodMetrics> {
    let by_nc = rank(&list, RankKey::Nc, n);
    let by_cud = rank(&list, RankKey::Cud, n);
    let pos = |r: &RankingResult| -> HashMap<String, u32> {
        r.entries.iter().map(|e| (e.entity_id.clone(), e.rank)).collect()
    };
    let (nc_pos, cud_pos) = (pos(&by_nc), pos(&by_cud));
    for m in &mut list {
        m.nc_score = position_score(nc_pos[&m.entity_id], n);
        m.cud_score = position_score(cud_pos[&m.entity_id], n);
        m.review_score = m.nc_score + m.cud_score;
    }
    list
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankKey {
    Re,
    Ri,
    Nc,
    Nr,
    Uc,
    Cud,
    Id,
    ReviewScore,
}

impl RankKey {
    pub fn as_str(self) -> &'static str {
        match self {
            RankKey::Re => "re",
            RankKey::Ri => "ri",
            RankKey::Nc => "nc",
            RankKey::Nr => "nr",
            RankKey::Uc => "uc",
            RankKey::Cud => "cud",
            RankKey::Id => "id",
            RankKey::ReviewScore => "review_score",
        }
    }
}

impl fmt::Display for RankKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RankKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = match s.to_ascii_lowercase().as_str() {
            "re" => RankKey::Re,
            "ri" => RankKey::Ri,
            "nc" => RankKey::Nc,
            "nr" => RankKey::Nr,
            "uc" => RankKey::Uc,
            "cud" => RankKey::Cud,
            "id" => RankKey::Id,
            "review_score" => RankKey::ReviewScore,
            other => return Err(format!("unknown ranking key {other:?}")),
        };
        Ok(key)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub entity_id: String,
    pub value: f64,
    pub rank: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingResult {
    pub key: RankKey,
    pub n: u32,
    pub entries: Vec<RankEntry>,
}

/// Sorts descending by `key`; equal values share a rank and the next rank
/// skips (1, 2, 2, 4). Ties are listed by entity id.
pub fn rank(list: &[ReviewerPeriodMetrics], key: RankKey, n: u32) -> RankingResult {
    let mut entries: Vec<RankEntry> = list
        .iter()
        .map(|m| RankEntry {
            entity_id: m.entity_id.clone(),
            value: m.value(key),
            rank: 0,
        })
        .collect();
    entries.sort_by(|a, b| b.value.total_cmp(&a.value).then_with(|| a.entity_id.cmp(&b.entity_id)));
    for i in 0..entries.len() {
        entries[i].rank = if i > 0 && entries[i].value == entries[i - 1].value {
            entries[i - 1].rank
        } else {
            i as u32 + 1
        };
    }
    RankingResult { key, n, entries }
}

/// Metrics in ranking order as CSV, one row per entity.
pub fn to_csv(list: &[ReviewerPeriodMetrics], ranking: &RankingResult, kind: EntityKind) -> String {
    let by_id: HashMap<&str, &ReviewerPeriodMetrics> = list.iter().map(|m| (m.entity_id.as_str(), m)).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "rank",
        kind.id_column(),
        "period_from",
        "period_to",
        "nr",
        "nc",
        "uc",
        "cud",
        "id",
        "re",
        "ri",
        "nc_score",
        "cud_score",
        "review_score",
    ])
    .expect("in-memory write");
    for e in &ranking.entries {
        let m = by_id[e.entity_id.as_str()];
        w.write_record([
            e.rank.to_string(),
            m.entity_id.clone(),
            timestamp::format(&m.period.from),
            timestamp::format(&m.period.to),
            m.nr.to_string(),
            m.nc.to_string(),
            m.uc.to_string(),
            format!("{:.4}", m.cud),
            format!("{:.4}", m.id),
            format!("{:.4}", m.re),
            m.ri.to_string(),
            m.nc_score.to_string(),
            m.cud_score.to_string(),
            m.review_score.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}
