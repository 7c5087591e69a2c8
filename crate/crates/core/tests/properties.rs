//! Property tests against brute-force oracles on small tests.

use std::collections::BTreeSet;

use proptest::prelude::*;
use psytest_core::format::{parse_test, serialize_test, TestDocument};
use psytest_core::generator::{delete_item, insert_item, move_item, set_bands};
use psytest_core::{
    band_of, compute_max_score, compute_min_score, raw_score, AnswerMap, Category, CategoryId,
    Item, ItemId, ScaleBinding, ScoreTuple, TestDefinition,
};
use rust_decimal::Decimal;

/// Every assignment of answer indices to `m` items over `k` options.
fn all_assignments(m: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..m {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..k).map(move |a| {
                    let mut p = prefix.clone();
                    p.push(a);
                    p
                })
            })
            .collect();
    }
    out
}

/// Direct re-summation: look up each bound item's tuple value by hand.
fn oracle_total(test: &TestDefinition, category: &CategoryId, picks: &[usize]) -> Decimal {
    let mut total = Decimal::ZERO;
    for (pos, item) in test.items_in_order().iter().enumerate() {
        for b in &test.bindings {
            if &b.category_id == category && b.item_id == item.id {
                total += b.tuple.values[picks[pos]];
            }
        }
    }
    total
}

fn answer_map(test: &TestDefinition, picks: &[usize]) -> AnswerMap {
    test.items_in_order()
        .iter()
        .zip(picks)
        .map(|(i, &a)| (i.id.clone(), a))
        .collect()
}

/// (items, answer options, per category: per item optional tuple)
fn small_test() -> impl Strategy<Value = TestDefinition> {
    (1usize..=4, 2usize..=3, 1usize..=2).prop_flat_map(|(m, k, cats)| {
        let tuple = prop::collection::vec(-2i64..=3, k);
        let row = prop::collection::vec(prop::option::weighted(0.7, tuple), m);
        prop::collection::vec(row, cats).prop_map(move |rows| build(m, k, rows))
    })
}

fn build(m: usize, k: usize, rows: Vec<Vec<Option<Vec<i64>>>>) -> TestDefinition {
    let answers: Vec<String> = (0..k).map(|i| format!("A{i}")).collect();
    let mut t = TestDefinition::new("prop", "prop", answers);
    for o in 1..=m {
        t.items.push(Item {
            id: format!("q{o}").into(),
            ordinal: o as u32,
            text: format!("item {o}"),
        });
    }
    for (c, row) in rows.into_iter().enumerate() {
        let cid = CategoryId::new(format!("c{c}"));
        t.categories.push(Category {
            id: cid.clone(),
            name: format!("cat {c}"),
        });
        let mut any = false;
        for (q, tuple) in row.into_iter().enumerate() {
            if let Some(v) = tuple {
                any = true;
                t.bindings.push(ScaleBinding {
                    category_id: cid.clone(),
                    item_id: format!("q{}", q + 1).into(),
                    tuple: ScoreTuple::from_ints(&v),
                });
            }
        }
        if !any {
            t.bindings.push(ScaleBinding {
                category_id: cid,
                item_id: "q1".into(),
                tuple: ScoreTuple::from_ints(&(0..k as i64).collect::<Vec<_>>()),
            });
        }
    }
    t
}

/// Cuts every non-degenerate category at each reachable interior score.
fn with_bands(test: &TestDefinition) -> TestDefinition {
    let mut out = test.clone();
    let k = test.answer_set.len();
    let all = all_assignments(test.items.len(), k);
    for c in &test.categories {
        let reachable: BTreeSet<Decimal> =
            all.iter().map(|p| oracle_total(test, &c.id, p)).collect();
        if reachable.len() < 2 {
            continue;
        }
        let bounds: Vec<Decimal> = reachable.into_iter().collect();
        let texts: Vec<String> = (1..bounds.len()).map(|i| format!("band {i}")).collect();
        out = set_bands(&out, &c.id, &bounds, &texts).unwrap();
    }
    out
}

proptest! {
    #[test]
    fn bounds_equal_exhaustive_extremes(t in small_test()) {
        let all = all_assignments(t.items.len(), t.answer_set.len());
        for c in &t.categories {
            let totals: Vec<Decimal> = all.iter().map(|p| oracle_total(&t, &c.id, p)).collect();
            let lo = *totals.iter().min().unwrap();
            let hi = *totals.iter().max().unwrap();
            prop_assert_eq!(compute_min_score(&t, &c.id).unwrap(), lo);
            if lo == hi {
                prop_assert!(compute_max_score(&t, &c.id).is_err());
            } else {
                prop_assert_eq!(compute_max_score(&t, &c.id).unwrap(), hi);
            }
        }
    }

    #[test]
    fn raw_score_matches_resummation_and_bounds(t in small_test(), seed in any::<u64>()) {
        let k = t.answer_set.len();
        let picks: Vec<usize> = (0..t.items.len())
            .map(|i| ((seed >> (i * 8)) as usize) % k)
            .collect();
        let answers = answer_map(&t, &picks);
        for c in &t.categories {
            let raw = raw_score(&t, &c.id, &answers).unwrap();
            prop_assert_eq!(raw, oracle_total(&t, &c.id, &picks));
            prop_assert!(compute_min_score(&t, &c.id).unwrap() <= raw);
            prop_assert!(raw <= psytest_core::scoring::score_bounds(&t, &c.id).unwrap().1);
        }
    }

    #[test]
    fn changing_one_answer_shifts_by_tuple_difference(
        t in small_test(), pos in 0usize..4, from in 0usize..3, to in 0usize..3,
    ) {
        let k = t.answer_set.len();
        let pos = pos % t.items.len();
        let (from, to) = (from % k, to % k);
        let mut picks = vec![0; t.items.len()];
        picks[pos] = from;
        let before = answer_map(&t, &picks);
        picks[pos] = to;
        let after = answer_map(&t, &picks);
        let item = t.items_in_order()[pos].id.clone();
        for c in &t.categories {
            let delta = raw_score(&t, &c.id, &after).unwrap() - raw_score(&t, &c.id, &before).unwrap();
            let expected = t
                .bindings
                .iter()
                .find(|b| b.category_id == c.id && b.item_id == item)
                .map_or(Decimal::ZERO, |b| b.tuple.values[to] - b.tuple.values[from]);
            prop_assert_eq!(delta, expected);
        }
    }

    #[test]
    fn bands_partition_the_score_range(t in small_test()) {
        let t = with_bands(&t);
        for c in &t.categories {
            let bands = t.bands_of(&c.id);
            if bands.is_empty() {
                continue;
            }
            let mut probes: Vec<Decimal> = Vec::new();
            for b in &bands {
                probes.push(b.lower);
                probes.push(b.upper);
                probes.push((b.lower + b.upper) / Decimal::TWO);
            }
            for p in &probes {
                let containing = bands.iter().filter(|b| b.contains(*p)).count();
                prop_assert_eq!(containing, 1);
                prop_assert!(band_of(&t, &c.id, *p).is_ok());
            }
            for b in &bands {
                prop_assert_eq!(band_of(&t, &c.id, b.upper).unwrap().index, b.index);
            }
            prop_assert_eq!(band_of(&t, &c.id, bands[0].lower).unwrap().index, 1);
        }
    }

    #[test]
    fn inert_item_changes_nothing(t in small_test(), seed in any::<u64>()) {
        let t = with_bands(&t);
        let mut extended = t.clone();
        let m = t.items.len() as u32;
        extended.items.push(Item { id: "inert".into(), ordinal: m + 1, text: "filler".into() });
        let k = t.answer_set.len();
        let picks: Vec<usize> = (0..t.items.len()).map(|i| ((seed >> (i * 8)) as usize) % k).collect();
        let answers = answer_map(&t, &picks);
        let mut extended_answers = answers.clone();
        extended_answers.insert(ItemId::new("inert"), (seed as usize) % k);
        for c in &t.categories {
            prop_assert_eq!(compute_min_score(&t, &c.id), compute_min_score(&extended, &c.id));
            prop_assert_eq!(compute_max_score(&t, &c.id), compute_max_score(&extended, &c.id));
            prop_assert_eq!(
                raw_score(&t, &c.id, &answers).unwrap(),
                raw_score(&extended, &c.id, &extended_answers).unwrap()
            );
        }
    }

    #[test]
    fn edit_scripts_keep_ordinals_a_bijection(
        t in small_test(),
        script in prop::collection::vec((0u8..3, 1u32..8, 1u32..8), 0..20),
    ) {
        let mut cur = t;
        for (op, a, b) in script {
            let m = cur.items.len() as u32;
            cur = match op {
                0 => insert_item(&cur, 1 + a % (m + 1), "inserted").unwrap(),
                1 if m > 0 => delete_item(&cur, 1 + a % m).unwrap(),
                2 if m > 0 => move_item(&cur, 1 + a % m, 1 + b % m).unwrap(),
                _ => cur,
            };
            let mut ords: Vec<u32> = cur.items.iter().map(|i| i.ordinal).collect();
            ords.sort_unstable();
            prop_assert_eq!(ords, (1..=cur.items.len() as u32).collect::<Vec<_>>());
            for binding in &cur.bindings {
                prop_assert!(cur.item(&binding.item_id).is_some());
            }
        }
    }

    #[test]
    fn documents_round_trip(t in small_test()) {
        let t = with_bands(&t);
        let t = TestDefinition {
            categories: t.categories.iter().filter(|c| !t.bands_of(&c.id).is_empty()).cloned().collect(),
            bindings: t.bindings.iter().filter(|b| !t.bands_of(&b.category_id).is_empty()).cloned().collect(),
            ..t
        };
        let doc = TestDocument::new(t);
        let bytes = serialize_test(&doc).unwrap();
        let back = parse_test(&bytes).unwrap();
        prop_assert_eq!(&back, &doc);
        prop_assert_eq!(serialize_test(&back).unwrap(), bytes);
    }
}
