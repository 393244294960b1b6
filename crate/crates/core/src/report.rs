//! Dashboard summaries, ranking tables and monthly timeseries read from a
//! [`Store`].

use chrono::{Datelike, Months, NaiveDate, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::metrics::{compute, rank, EntityKind, Period, RankKey, ReviewerPeriodMetrics, LEGACY_N};
use crate::model::Timestamp;
use crate::store::{Store, StoreError};

pub const TOP: usize = 5;
pub const DEFAULT_LIMIT: usize = 100;
pub const DEFAULT_PERIOD_MONTHS: u32 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingRow {
    pub rank: u32,
    pub entity_id: String,
    pub value: f64,
    pub nr: u32,
    pub nc: u32,
    pub uc: u32,
    pub cud: f64,
    pub id: f64,
    pub re: f64,
    pub ri: i64,
    pub review_score: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingTable {
    pub period: Period,
    pub entity: EntityKind,
    pub key: RankKey,
    pub total: usize,
    pub offset: usize,
    pub rows: Vec<RankingRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestReviewer {
    pub developer_id: String,
    pub ri: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestProject {
    pub project_id: String,
    pub useful_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DashboardSummary {
    pub period: Period,
    pub best_reviewer: Option<BestReviewer>,
    pub best_project: Option<BestProject>,
    pub useful_pct: f64,
    pub top5_reviewers: Vec<RankingRow>,
    pub top5_projects: Vec<RankingRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthBucket {
    /// `YYYY-MM`.
    pub month: String,
    pub metrics: ReviewerPeriodMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityTimeseries {
    pub kind: EntityKind,
    pub entity_id: String,
    pub buckets: Vec<MonthBucket>,
}

/// Metrics of every active entity in `period`, with legacy scores.
pub fn period_metrics(store: &Store, period: &Period, kind: EntityKind) -> Result<Vec<ReviewerPeriodMetrics>, StoreError> {
    let (changes, verdicts) = store.activity(period.from, period.to)?;
    Ok(compute(&changes, &verdicts, period, kind, LEGACY_N))
}

fn rows(list: &[ReviewerPeriodMetrics], key: RankKey) -> Vec<RankingRow> {
    let ranking = rank(list, key, LEGACY_N);
    ranking
        .entries
        .iter()
        .map(|e| {
            let m = list.iter().find(|m| m.entity_id == e.entity_id).expect("ranked entity");
            RankingRow {
                rank: e.rank,
                entity_id: e.entity_id.clone(),
                value: e.value,
                nr: m.nr,
                nc: m.nc,
                uc: m.uc,
                cud: m.cud,
                id: m.id,
                re: m.re,
                ri: m.ri,
                review_score: m.review_score,
            }
        })
        .collect()
}

pub fn ranking_table(
    store: &Store,
    period: &Period,
    entity: EntityKind,
    key: RankKey,
    offset: usize,
    limit: usize,
) -> Result<RankingTable, StoreError> {
    let list = period_metrics(store, period, entity)?;
    let all = rows(&list, key);
    Ok(RankingTable {
        period: *period,
        entity,
        key,
        total: all.len(),
        offset,
        rows: all.into_iter().skip(offset).take(limit).collect(),
    })
}

/// The best reviewer is the one with the highest review impact; the best
/// project is the one with the highest share of useful comments.
pub fn dashboard(store: &Store, period: &Period) -> Result<DashboardSummary, StoreError> {
    let reviewers = period_metrics(store, period, EntityKind::Reviewer)?;
    let projects = period_metrics(store, period, EntityKind::Project)?;
    let (uc, nc) = projects.iter().fold((0u64, 0u64), |(u, n), m| (u + m.uc as u64, n + m.nc as u64));
    let mut top_r = rows(&reviewers, RankKey::Ri);
    let mut top_p = rows(&projects, RankKey::Cud);
    top_r.truncate(TOP);
    top_p.truncate(TOP);
    Ok(DashboardSummary {
        period: *period,
        best_reviewer: top_r.first().map(|r| BestReviewer {
            developer_id: r.entity_id.clone(),
            ri: r.ri,
        }),
        best_project: top_p.first().map(|r| BestProject {
            project_id: r.entity_id.clone(),
            useful_pct: 100.0 * r.cud,
        }),
        useful_pct: if nc == 0 { 0.0 } else { 100.0 * uc as f64 / nc as f64 },
        top5_reviewers: top_r,
        top5_projects: top_p,
    })
}

fn month_start(year: i32, month: u32) -> Timestamp {
    Utc.from_utc_datetime(&NaiveDate::from_ymd_opt(year, month, 1).expect("valid month").and_hms_opt(0, 0, 0).unwrap())
}

/// The `months` complete calendar months before the month containing `now`.
pub fn default_period(now: Timestamp, months: u32) -> Period {
    let to = month_start(now.year(), now.month());
    Period {
        from: to - Months::new(months),
        to,
    }
}

/// Monthly metrics for the `months` calendar months ending with the one that
/// contains `now`. Months without activity are present with zero counts.
/// Returns `None` for an unknown entity.
pub fn entity_timeseries(
    store: &Store,
    kind: EntityKind,
    entity_id: &str,
    months: u32,
    now: Timestamp,
) -> Result<Option<EntityTimeseries>, StoreError> {
    let exists = match kind {
        EntityKind::Reviewer => store.developer_exists(entity_id)?,
        EntityKind::Project => store.project_exists(entity_id)?,
    };
    if !exists {
        return Ok(None);
    }
    let current = month_start(now.year(), now.month());
    let mut buckets = Vec::new();
    for back in (0..months).rev() {
        let from = current - Months::new(back);
        let period = Period {
            from,
            to: from + Months::new(1),
        };
        let metrics = period_metrics(store, &period, kind)?
            .into_iter()
            .find(|m| m.entity_id == entity_id)
            .unwrap_or_else(|| ReviewerPeriodMetrics::from_counts(entity_id, period, Default::default()));
        buckets.push(MonthBucket {
            month: from.format("%Y-%m").to_string(),
            metrics,
        });
    }
    Ok(Some(EntityTimeseries {
        kind,
        entity_id: entity_id.to_string(),
        buckets,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_period_is_previous_two_months() {
        let now = Utc.with_ymd_and_hms(2024, 3, 15, 8, 0, 0).unwrap();
        let p = default_period(now, 2);
        assert_eq!(p.from, Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap());
        assert_eq!(p.to, Utc.with_ymd_and_hms(2024, 3, 1, 0, 0, 0).unwrap());
    }
}
