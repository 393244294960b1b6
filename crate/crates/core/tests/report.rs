use std::collections::HashMap;

use chrono::{TimeZone, Utc};
use cra_core::metrics::{compute, rank, EntityKind, Period, RankKey, LEGACY_N};
use cra_core::report::{dashboard, entity_timeseries, ranking_table};
use cra_core::store::Store;
use cra_core::synth::{generate, SynthConfig};

fn seeded() -> (tempfile::TempDir, Store, cra_core::synth::SyntheticHistory) {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(&dir.path().join("s.db")).unwrap();
    let h = generate(&SynthConfig { comments: 150, days: 90, ..SynthConfig::default() });
    store.upsert_dump(&h.dump).unwrap();
    store.import_labels(&h.labels, Utc::now()).unwrap();
    (dir, store, h)
}

fn q1() -> Period {
    Period {
        from: Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap(),
        to: Utc.with_ymd_and_hms(2024, 4, 1, 0, 0, 0).unwrap(),
    }
}

#[test]
fn ranking_table_matches_metrics_oracle() {
    let (_d, store, h) = seeded();
    let verdicts: HashMap<String, bool> = h.labels.iter().map(|l| (l.comment_id.clone(), l.is_useful)).collect();
    let oracle = compute(&h.dump.changes, &verdicts, &q1(), EntityKind::Reviewer, LEGACY_N);
    let want: Vec<String> = rank(&oracle, RankKey::Ri, LEGACY_N).entries.into_iter().map(|e| e.entity_id).collect();
    let table = ranking_table(&store, &q1(), EntityKind::Reviewer, RankKey::Ri, 0, 100).unwrap();
    let got: Vec<String> = table.rows.iter().map(|r| r.entity_id.clone()).collect();
    assert_eq!(got, want);
    assert!(table.rows.windows(2).all(|w| w[0].ri >= w[1].ri));

    let page = ranking_table(&store, &q1(), EntityKind::Reviewer, RankKey::Ri, 2, 3).unwrap();
    assert_eq!(page.rows.len(), 3);
    assert_eq!(page.rows[0].entity_id, want[2]);
    assert_eq!(page.total, want.len());

    let projects = ranking_table(&store, &q1(), EntityKind::Project, RankKey::Nc, 0, 100).unwrap();
    let total_nc: u32 = projects.rows.iter().map(|r| r.nc).sum();
    let reviewer_nc: u32 = table.rows.iter().map(|r| r.nc).sum();
    assert_eq!(total_nc, reviewer_nc);
    assert!(projects.rows.iter().all(|r| r.entity_id.starts_with("proj")));
}

#[test]
fn dashboard_summary_shape() {
    let (_d, store, h) = seeded();
    let s = dashboard(&store, &q1()).unwrap();
    assert!(s.top5_reviewers.len() <= 5 && s.top5_projects.len() <= 5);
    assert_eq!(s.best_reviewer.as_ref().unwrap().developer_id, s.top5_reviewers[0].entity_id);
    let useful = h.labels.iter().filter(|l| l.is_useful).count() as f64;
    assert!((s.useful_pct - 100.0 * useful / h.labels.len() as f64).abs() < 1e-9);

    let empty = Period {
        from: Utc.with_ymd_and_hms(2030, 1, 1, 0, 0, 0).unwrap(),
        to: Utc.with_ymd_and_hms(2030, 2, 1, 0, 0, 0).unwrap(),
    };
    let e = dashboard(&store, &empty).unwrap();
    assert_eq!(e.useful_pct, 0.0);
    assert!(e.top5_reviewers.is_empty() && e.best_reviewer.is_none());
    // read consistency
    assert_eq!(dashboard(&store, &q1()).unwrap(), s);
}

#[test]
fn timeseries_has_contiguous_months() {
    let (_d, store, _h) = seeded();
    let now = Utc.with_ymd_and_hms(2024, 5, 10, 0, 0, 0).unwrap();
    let ts = entity_timeseries(&store, EntityKind::Reviewer, "dev01", 3, now).unwrap().unwrap();
    let months: Vec<&str> = ts.buckets.iter().map(|b| b.month.as_str()).collect();
    assert_eq!(months, ["2024-03", "2024-04", "2024-05"]);
    // the synthetic history ends in March
    assert_eq!(ts.buckets[2].metrics.nc, 0);
    assert_eq!(ts.buckets[2].metrics.ri, 0);
    assert!(entity_timeseries(&store, EntityKind::Reviewer, "ghost", 3, now).unwrap().is_none());
    let p = entity_timeseries(&store, EntityKind::Project, "proj0", 6, now).unwrap().unwrap();
    assert_eq!(p.buckets.len(), 6);
    assert!(p.buckets.iter().any(|b| b.metrics.nc > 0));
}
