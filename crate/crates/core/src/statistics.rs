//! Descriptive statistics over completed sessions and CSV export.
//!
//! Standard deviations are population standard deviations (divide by n).
//! Every session is re-scored against the test before it is counted; a
//! persisted result that no longer matches is reported as
//! [`StatsError::StaleNorms`].

use std::collections::HashMap;

use rust_decimal::{Decimal, MathematicalOps};
use thiserror::Error;

use crate::model::{CategoryId, ItemId, TestDefinition};
use crate::scoring::score_all;
use crate::session_log::LogRecord;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryStats {
    pub category_id: CategoryId,
    pub n: usize,
    pub mean: Decimal,
    /// Population standard deviation.
    pub std_dev: Decimal,
    pub min: Decimal,
    pub max: Decimal,
    /// `band_histogram[i]` counts sessions that fell in band `i + 1`.
    pub band_histogram: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemStats {
    pub item_id: ItemId,
    pub ordinal: u32,
    /// `answer_frequencies[i]` counts sessions that chose answer `i`.
    pub answer_frequencies: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Summary {
    pub categories: Vec<CategoryStats>,
    pub items: Vec<ItemStats>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Aggregate {
    /// No sessions were given; nothing can be summarised.
    Empty,
    Summary(Summary),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("session `{session}` belongs to test `{found}`, expected `{expected}`")]
    TestMismatch {
        session: String,
        expected: String,
        found: String,
    },
    #[error("session `{0}` is not completed")]
    NotCompleted(String),
    #[error("STALE_NORMS: session `{session}` does not match the current test: {detail}")]
    StaleNorms { session: String, detail: String },
}

impl StatsError {
    pub fn code(&self) -> &'static str {
        match self {
            StatsError::TestMismatch { .. } => "TEST_MISMATCH",
            StatsError::NotCompleted(_) => "NOT_COMPLETED",
            StatsError::StaleNorms { .. } => "STALE_NORMS",
        }
    }
}

fn stale(session: &str, detail: impl Into<String>) -> StatsError {
    StatsError::StaleNorms {
        session: session.to_owned(),
        detail: detail.into(),
    }
}

fn check_record(record: &LogRecord, test: &TestDefinition) -> Result<(), StatsError> {
    let s = &record.session;
    if s.test_id != test.test_id {
        return Err(StatsError::TestMismatch {
            session: s.session_id.clone(),
            expected: test.test_id.clone(),
            found: s.test_id.clone(),
        });
    }
    if !s.is_completed() {
        return Err(StatsError::NotCompleted(s.session_id.clone()));
    }
    let answers = s.answer_map();
    if answers.len() != s.answers.len()
        || answers.len() != test.items.len()
        || test.items.iter().any(|i| !answers.contains_key(&i.id))
    {
        return Err(stale(
            &s.session_id,
            "answered items differ from the test's items",
        ));
    }
    if answers.values().any(|&a| a >= test.answer_set.len()) {
        return Err(stale(&s.session_id, "answer index outside the answer set"));
    }
    let fresh = score_all(test, &answers).map_err(|e| stale(&s.session_id, e.to_string()))?;
    if fresh.len() != record.result.categories.len() {
        return Err(stale(&s.session_id, "category set changed"));
    }
    for (now, then) in fresh.iter().zip(&record.result.categories) {
        if now.category_id != then.category_id
            || now.raw_score != then.raw_score
            || now.band_index != then.band_index
        {
            return Err(stale(
                &s.session_id,
                format!(
                    "category `{}` recorded raw {} band {}, recomputed raw {} band {}",
                    then.category_id,
                    then.raw_score,
                    then.band_index,
                    now.raw_score,
                    now.band_index
                ),
            ));
        }
    }
    Ok(())
}

/// Per-category and per-item statistics over `records`.
pub fn aggregate(records: &[LogRecord], test: &TestDefinition) -> Result<Aggregate, StatsError> {
    for r in records {
        check_record(r, test)?;
    }
    if records.is_empty() {
        return Ok(Aggregate::Empty);
    }
    let n = records.len();
    let count = Decimal::from(n as u64);

    let categories = test
        .categories
        .iter()
        .map(|c| {
            let bands = test.bands_of(&c.id).len();
            let mut histogram = vec![0u64; bands];
            let raws: Vec<Decimal> = records
                .iter()
                .map(|r| {
                    let res = r
                        .result
                        .categories
                        .iter()
                        .find(|x| x.category_id == c.id)
                        .expect("checked above");
                    histogram[res.band_index as usize - 1] += 1;
                    res.raw_score
                })
                .collect();
            let mean = raws.iter().sum::<Decimal>() / count;
            let variance = raws
                .iter()
                .map(|&x| (x - mean) * (x - mean))
                .sum::<Decimal>()
                / count;
            let std_dev = variance.sqrt().expect("variance is non-negative");
            CategoryStats {
                category_id: c.id.clone(),
                n,
                mean: mean.normalize(),
                std_dev: std_dev.normalize(),
                min: raws.iter().copied().min().expect("n > 0"),
                max: raws.iter().copied().max().expect("n > 0"),
                band_histogram: histogram,
            }
        })
        .collect();

    let k = test.answer_set.len();
    let mut freq: HashMap<&ItemId, Vec<u64>> =
        test.items.iter().map(|i| (&i.id, vec![0u64; k])).collect();
    for r in records {
        for a in &r.session.answers {
            if let Some(f) = freq.get_mut(&a.item_id) {
                f[a.answer_index] += 1;
            }
        }
    }
    let items = test
        .items_in_order()
        .into_iter()
        .map(|i| ItemStats {
            item_id: i.id.clone(),
            ordinal: i.ordinal,
            answer_frequencies: freq.remove(&i.id).unwrap_or_default(),
        })
        .collect();

    Ok(Aggregate::Summary(Summary { categories, items }))
}

fn finish(writer: csv::Writer<Vec<u8>>) -> Vec<u8> {
    writer
        .into_inner()
        .expect("writing CSV to memory cannot fail")
}

pub const SUMMARY_HEADER: [&str; 8] = [
    "category_id",
    "category",
    "n",
    "mean",
    "std_dev_population",
    "min",
    "max",
    "band_counts",
];

/// One row per category. `band_counts` lists the histogram as
/// semicolon-separated counts in band order.
pub fn export_summary_csv(aggregate: &Aggregate, test: &TestDefinition) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUMMARY_HEADER).expect("in-memory write");
    if let Aggregate::Summary(s) = aggregate {
        for c in &s.categories {
            let name = test
                .category(&c.category_id)
                .map_or("", |x| x.name.as_str());
            let counts: Vec<String> = c.band_histogram.iter().map(u64::to_string).collect();
            w.write_record([
                c.category_id.as_str(),
                name,
                &c.n.to_string(),
                &c.mean.to_string(),
                &c.std_dev.to_string(),
                &c.min.to_string(),
                &c.max.to_string(),
                &counts.join(";"),
            ])
            .expect("in-memory write");
        }
    }
    finish(w)
}

/// Header of the raw session matrix: session id, demographic fields in
/// schema order, item ordinals, then `<category>_raw` and `<category>_band`
/// columns in declaration order.
pub fn matrix_header(test: &TestDefinition) -> Vec<String> {
    let mut h = vec!["session_id".to_owned()];
    h.extend(test.demographics.iter().map(|f| f.name.clone()));
    h.extend(test.items_in_order().iter().map(|i| i.ordinal.to_string()));
    h.extend(test.categories.iter().map(|c| format!("{}_raw", c.id)));
    h.extend(test.categories.iter().map(|c| format!("{}_band", c.id)));
    h
}

/// One row per session with the answer index of every item and the
/// recorded results, loadable by external statistics packages.
pub fn export_matrix_csv(records: &[LogRecord], test: &TestDefinition) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(matrix_header(test))
        .expect("in-memory write");
    let items = test.items_in_order();
    for r in records {
        let s = &r.session;
        let answers = s.answer_map();
        let mut row = vec![s.session_id.clone()];
        row.extend(test.demographics.iter().map(|f| {
            s.demographics
                .get(&f.name)
                .map(ToString::to_string)
                .unwrap_or_default()
        }));
        row.extend(items.iter().map(|i| {
            answers
                .get(&i.id)
                .map(ToString::to_string)
                .unwrap_or_default()
        }));
        let result_of = |c: &CategoryId| r.result.categories.iter().find(|x| &x.category_id == c);
        row.extend(test.categories.iter().map(|c| {
            result_of(&c.id)
                .map(|x| x.raw_score.to_string())
                .unwrap_or_default()
        }));
        row.extend(test.categories.iter().map(|c| {
            result_of(&c.id)
                .map(|x| x.band_index.to_string())
                .unwrap_or_default()
        }));
        w.write_record(&row).expect("in-memory write");
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::executor::submit_answer_at;
    use crate::executor::{score_session, start_session_with, Demographics};
    use crate::fixtures::yes_no_counting_test;
    use crate::model::DemographicValue;
    use chrono::{TimeZone, Utc};

    fn record(id: &str, sex: &str, picks: &[usize]) -> LogRecord {
        let t = yes_no_counting_test();
        let demo: Demographics = [
            ("sex".to_owned(), DemographicValue::Text(sex.into())),
            ("age".to_owned(), DemographicValue::Integer(30)),
        ]
        .into_iter()
        .collect();
        let at = Utc.with_ymd_and_hms(2024, 3, 3, 12, 0, 0).unwrap();
        let mut s = start_session_with(&t, demo, id, at).unwrap();
        for &p in picks {
            s = submit_answer_at(&s, &t, p, at).unwrap();
        }
        let result = score_session(&s, &t).unwrap();
        LogRecord { session: s, result }
    }

    fn summary(records: &[LogRecord]) -> Summary {
        match aggregate(records, &yes_no_counting_test()).unwrap() {
            Aggregate::Summary(s) => s,
            Aggregate::Empty => panic!("expected a summary"),
        }
    }

    #[test]
    fn two_sessions_hand_computed() {
        // raws 0 and 2: mean 1, population sd 1.
        let s = summary(&[record("a", "F", &[1, 1, 1]), record("b", "M", &[0, 1, 0])]);
        let c = &s.categories[0];
        assert_eq!(c.n, 2);
        assert_eq!(c.mean, Decimal::ONE);
        assert_eq!(c.std_dev, Decimal::ONE);
        assert_eq!((c.min, c.max), (Decimal::ZERO, Decimal::from(2)));
        assert_eq!(c.band_histogram, vec![1, 1]);
        assert_eq!(s.items[0].answer_frequencies, vec![1, 1]);
        assert_eq!(s.items[1].answer_frequencies, vec![0, 2]);
    }

    #[test]
    fn single_and_identical_sessions_have_zero_spread() {
        let s = summary(&[record("a", "F", &[0, 0, 1])]);
        assert_eq!(s.categories[0].std_dev, Decimal::ZERO);
        let same: Vec<_> = (0..4)
            .map(|i| record(&format!("s{i}"), "F", &[0, 0, 0]))
            .collect();
        let s = summary(&same);
        assert_eq!(s.categories[0].std_dev, Decimal::ZERO);
        assert_eq!(s.categories[0].band_histogram, vec![0, 4]);
    }

    #[test]
    fn empty_is_explicit() {
        assert_eq!(
            aggregate(&[], &yes_no_counting_test()).unwrap(),
            Aggregate::Empty
        );
    }

    #[test]
    fn mismatched_and_stale() {
        let mut other = yes_no_counting_test();
        other.test_id = "other".into();
        let r = record("a", "F", &[0, 0, 0]);
        assert_eq!(
            aggregate(std::slice::from_ref(&r), &other)
                .unwrap_err()
                .code(),
            "TEST_MISMATCH"
        );

        let mut edited = yes_no_counting_test();
        edited.bands[0].upper = Decimal::from(2);
        edited.bands[1].lower = Decimal::from(2);
        let r = record("b", "F", &[0, 0, 1]);
        let err = aggregate(&[r], &edited).unwrap_err();
        assert_eq!(err.code(), "STALE_NORMS");
        assert!(err.to_string().starts_with("STALE_NORMS"));
    }

    #[test]
    fn empty_csv_is_header_only() {
        let t = yes_no_counting_test();
        let csv = String::from_utf8(export_summary_csv(&Aggregate::Empty, &t)).unwrap();
        assert_eq!(
            csv,
            "category_id,category,n,mean,std_dev_population,min,max,band_counts\n"
        );
        let csv = String::from_utf8(export_matrix_csv(&[], &t)).unwrap();
        assert_eq!(csv, "session_id,sex,age,1,2,3,pos_raw,pos_band\n");
    }

    #[test]
    fn matrix_two_sessions() {
        let t = yes_no_counting_test();
        let rows = [record("a", "F", &[1, 1, 1]), record("b", "M", &[0, 1, 0])];
        let csv = String::from_utf8(export_matrix_csv(&rows, &t)).unwrap();
        assert_eq!(
            csv,
            "session_id,sex,age,1,2,3,pos_raw,pos_band\n\
             a,F,30,1,1,1,0,1\n\
             b,M,30,0,1,0,2,2\n"
        );
    }

    #[test]
    fn commas_are_quoted() {
        let mut t = yes_no_counting_test();
        t.demographics[0].kind =
            crate::model::DemographicKind::Choice(vec!["F".into(), "Smith, J.".into()]);
        let mut r = record("a", "F", &[0, 0, 0]);
        r.session
            .demographics
            .insert("sex".into(), DemographicValue::Text("Smith, J.".into()));
        let csv = String::from_utf8(export_matrix_csv(&[r], &t)).unwrap();
        assert!(csv
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("a,\"Smith, J.\",30,"));
    }

    #[test]
    fn summary_csv_row() {
        let t = yes_no_counting_test();
        let agg = aggregate(
            &[record("a", "F", &[1, 1, 1]), record("b", "M", &[0, 1, 0])],
            &t,
        )
        .unwrap();
        let csv = String::from_utf8(export_summary_csv(&agg, &t)).unwrap();
        assert_eq!(
            csv.lines().nth(1),
            Some("pos,Positive answers,2,1,1,0,2,1;1")
        );
    }
}
