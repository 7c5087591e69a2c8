//! Score bounds, raw scores and band lookup.
//!
//! The minimum score of a category is the sum over its bound items of the
//! smallest tuple value, the maximum is the sum of the largest. Items
//! without a binding for the category contribute nothing.

use rust_decimal::Decimal;
use thiserror::Error;

use crate::model::{AnswerMap, Band, CategoryId, CategoryResult, ItemId, TestDefinition};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScoreError {
    #[error("unknown category `{0}`")]
    UnknownCategory(CategoryId),
    #[error("category `{0}` has no scale bindings")]
    NoBindings(CategoryId),
    #[error("category `{category}` has a degenerate scale: minimum and maximum are both {value}")]
    Degenerate {
        category: CategoryId,
        value: Decimal,
    },
    #[error("binding of category `{category}` to item `{item}` has an empty score tuple")]
    EmptyTuple { category: CategoryId, item: ItemId },
    #[error("no answer for item `{0}`")]
    MissingAnswer(ItemId),
    #[error("answer index {index} for item `{item}` is out of range 0..{options}")]
    AnswerOutOfRange {
        item: ItemId,
        index: usize,
        options: usize,
    },
    #[error("score {score} lies outside [{min}, {max}] for category `{category}`")]
    ScoreOutOfRange {
        category: CategoryId,
        score: Decimal,
        min: Decimal,
        max: Decimal,
    },
    #[error("no band of category `{category}` contains score {score}")]
    NoBand {
        category: CategoryId,
        score: Decimal,
    },
}

/// Minimum and maximum achievable score of a category, without the
/// degeneracy check.
pub fn score_bounds(
    test: &TestDefinition,
    category: &CategoryId,
) -> Result<(Decimal, Decimal), ScoreError> {
    if test.category(category).is_none() {
        return Err(ScoreError::UnknownCategory(category.clone()));
    }
    let mut min = Decimal::ZERO;
    let mut max = Decimal::ZERO;
    let mut bound = 0usize;
    for binding in test.bindings_of(category) {
        let empty = || ScoreError::EmptyTuple {
            category: category.clone(),
            item: binding.item_id.clone(),
        };
        min += binding.tuple.min().ok_or_else(empty)?;
        max += binding.tuple.max().ok_or_else(empty)?;
        bound += 1;
    }
    if bound == 0 {
        return Err(ScoreError::NoBindings(category.clone()));
    }
    Ok((min, max))
}

/// The smallest total any respondent can obtain for `category`.
pub fn compute_min_score(
    test: &TestDefinition,
    category: &CategoryId,
) -> Result<Decimal, ScoreError> {
    score_bounds(test, category).map(|(min, _)| min)
}

/// The largest total any respondent can obtain for `category`.
///
/// Fails with [`ScoreError::Degenerate`] when every bound tuple is constant,
/// since then no band partition of the score range exists.
pub fn compute_max_score(
    test: &TestDefinition,
    category: &CategoryId,
) -> Result<Decimal, ScoreError> {
    let (min, max) = score_bounds(test, category)?;
    if min == max {
        return Err(ScoreError::Degenerate {
            category: category.clone(),
            value: max,
        });
    }
    Ok(max)
}

/// Sum of the tuple values selected by `answers` over the category's bound
/// items. Answers to items outside the scale are ignored.
pub fn raw_score(
    test: &TestDefinition,
    category: &CategoryId,
    answers: &AnswerMap,
) -> Result<Decimal, ScoreError> {
    if test.category(category).is_none() {
        return Err(ScoreError::UnknownCategory(category.clone()));
    }
    test.bindings_of(category)
        .try_fold(Decimal::ZERO, |total, binding| {
            let index = *answers
                .get(&binding.item_id)
                .ok_or_else(|| ScoreError::MissingAnswer(binding.item_id.clone()))?;
            let value =
                binding
                    .tuple
                    .values
                    .get(index)
                    .ok_or_else(|| ScoreError::AnswerOutOfRange {
                        item: binding.item_id.clone(),
                        index,
                        options: binding.tuple.len(),
                    })?;
            Ok(total + value)
        })
}

/// The band of `category` containing `score`.
pub fn band_of<'a>(
    test: &'a TestDefinition,
    category: &CategoryId,
    score: Decimal,
) -> Result<&'a Band, ScoreError> {
    let (min, max) = score_bounds(test, category)?;
    if score < min || score > max {
        return Err(ScoreError::ScoreOutOfRange {
            category: category.clone(),
            score,
            min,
            max,
        });
    }
    test.bands_of(category)
        .into_iter()
        .find(|b| b.contains(score))
        .ok_or_else(|| ScoreError::NoBand {
            category: category.clone(),
            score,
        })
}

/// Raw score, band and interpretation for every category, in declaration
/// order.
pub fn score_all(
    test: &TestDefinition,
    answers: &AnswerMap,
) -> Result<Vec<CategoryResult>, ScoreError> {
    test.categories
        .iter()
        .map(|c| {
            let raw = raw_score(test, &c.id, answers)?;
            let band = band_of(test, &c.id, raw)?;
            Ok(CategoryResult {
                category_id: c.id.clone(),
                raw_score: raw,
                band_index: band.index,
                interpretation: band.interpretation.clone(),
            })
        })
        .collect()
}
