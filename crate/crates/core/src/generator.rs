//! Authoring operations. Each one takes a test by reference and returns an
//! edited copy, keeping ordinals a bijection onto `1..=m` and never leaving
//! a binding that points at a deleted item.

use rust_decimal::Decimal;
use thiserror::Error;
use uuid::Uuid;

use crate::model::{
    Band, Category, CategoryId, DemographicField, Item, ItemId, ScaleBinding, ScoreTuple,
    TestDefinition,
};
use crate::scoring::{score_bounds, ScoreError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EditError {
    #[error("position {position} is out of range 1..={max}")]
    PositionOutOfRange { position: u32, max: u32 },
    #[error("no item has ordinal {0}")]
    UnknownOrdinal(u32),
    #[error("unknown item `{0}`")]
    UnknownItem(ItemId),
    #[error("unknown category `{0}`")]
    UnknownCategory(CategoryId),
    #[error("item id `{0}` already exists")]
    DuplicateItemId(ItemId),
    #[error("category `{0}` already exists")]
    DuplicateCategory(String),
    #[error("demographic field `{0}` already exists")]
    DuplicateDemographicField(String),
    #[error("{0} must not be empty")]
    EmptyText(&'static str),
    #[error("score tuple has {got} values but the answer set has {expected}")]
    TupleLength { expected: usize, got: usize },
    #[error("band boundaries must be strictly increasing (position {0})")]
    NonMonotoneBoundaries(usize),
    #[error("at least two band boundaries are required")]
    TooFewBoundaries,
    #[error("boundaries span [{first}, {last}] but achievable scores span [{min}, {max}]")]
    EndpointMismatch {
        first: Decimal,
        last: Decimal,
        min: Decimal,
        max: Decimal,
    },
    #[error("{intervals} interval(s) need {intervals} interpretation text(s), got {texts}")]
    TextCount { intervals: usize, texts: usize },
    #[error(transparent)]
    Score(#[from] ScoreError),
}

/// A fresh item id that cannot collide with ids handed out before.
pub fn new_item_id() -> ItemId {
    ItemId(format!("q-{}", Uuid::new_v4().simple()))
}

fn item_count(test: &TestDefinition) -> u32 {
    test.items.len() as u32
}

/// Inserts a new item at `position`, shifting later items down by one.
pub fn insert_item(
    test: &TestDefinition,
    position: u32,
    text: &str,
) -> Result<TestDefinition, EditError> {
    insert_item_with_id(test, position, text, new_item_id())
}

/// [`insert_item`] with a caller-chosen id.
pub fn insert_item_with_id(
    test: &TestDefinition,
    position: u32,
    text: &str,
    id: ItemId,
) -> Result<TestDefinition, EditError> {
    let max = item_count(test) + 1;
    if position < 1 || position > max {
        return Err(EditError::PositionOutOfRange { position, max });
    }
    if text.trim().is_empty() {
        return Err(EditError::EmptyText("item text"));
    }
    if test.item(&id).is_some() {
        return Err(EditError::DuplicateItemId(id));
    }
    let mut out = test.clone();
    for item in &mut out.items {
        if item.ordinal >= position {
            item.ordinal += 1;
        }
    }
    out.items.push(Item {
        id,
        ordinal: position,
        text: text.to_owned(),
    });
    out.items.sort_by_key(|i| i.ordinal);
    Ok(out)
}

/// Removes the item at `ordinal` together with all its scale bindings.
pub fn delete_item(test: &TestDefinition, ordinal: u32) -> Result<TestDefinition, EditError> {
    let id = test
        .item_at(ordinal)
        .ok_or(EditError::UnknownOrdinal(ordinal))?
        .id
        .clone();
    let mut out = test.clone();
    out.items.retain(|i| i.id != id);
    out.bindings.retain(|b| b.item_id != id);
    for item in &mut out.items {
        if item.ordinal > ordinal {
            item.ordinal -= 1;
        }
    }
    Ok(out)
}

/// Moves an item so that it ends up at `to`, keeping its id and bindings.
pub fn move_item(test: &TestDefinition, from: u32, to: u32) -> Result<TestDefinition, EditError> {
    let m = item_count(test);
    for ordinal in [from, to] {
        if ordinal < 1 || ordinal > m {
            return Err(EditError::UnknownOrdinal(ordinal));
        }
    }
    let mut out = test.clone();
    for item in &mut out.items {
        let o = item.ordinal;
        item.ordinal = if o == from {
            to
        } else if from < to && o > from && o <= to {
            o - 1
        } else if to < from && o >= to && o < from {
            o + 1
        } else {
            o
        };
    }
    out.items.sort_by_key(|i| i.ordinal);
    Ok(out)
}

pub fn add_category(
    test: &TestDefinition,
    id: CategoryId,
    name: &str,
) -> Result<TestDefinition, EditError> {
    if name.trim().is_empty() {
        return Err(EditError::EmptyText("category name"));
    }
    if test.category(&id).is_some() {
        return Err(EditError::DuplicateCategory(id.0));
    }
    if test.category_by_name(name).is_some() {
        return Err(EditError::DuplicateCategory(name.to_owned()));
    }
    let mut out = test.clone();
    out.categories.push(Category {
        id,
        name: name.to_owned(),
    });
    Ok(out)
}

pub fn add_demographic(
    test: &TestDefinition,
    field: DemographicField,
) -> Result<TestDefinition, EditError> {
    if field.name.trim().is_empty() {
        return Err(EditError::EmptyText("demographic field name"));
    }
    if test.demographics.iter().any(|f| f.name == field.name) {
        return Err(EditError::DuplicateDemographicField(field.name));
    }
    let mut out = test.clone();
    out.demographics.push(field);
    Ok(out)
}

/// Sets the scale value of `category` for `item`, replacing any previous one.
pub fn bind_scale(
    test: &TestDefinition,
    category: &CategoryId,
    item: &ItemId,
    tuple: ScoreTuple,
) -> Result<TestDefinition, EditError> {
    if test.category(category).is_none() {
        return Err(EditError::UnknownCategory(category.clone()));
    }
    if test.item(item).is_none() {
        return Err(EditError::UnknownItem(item.clone()));
    }
    let expected = test.answer_set.len();
    if tuple.len() != expected {
        return Err(EditError::TupleLength {
            expected,
            got: tuple.len(),
        });
    }
    let mut out = test.clone();
    match out
        .bindings
        .iter_mut()
        .find(|b| &b.category_id == category && &b.item_id == item)
    {
        Some(existing) => existing.tuple = tuple,
        None => out.bindings.push(ScaleBinding {
            category_id: category.clone(),
            item_id: item.clone(),
            tuple,
        }),
    }
    Ok(out)
}

/// Replaces the bands of `category` with the intervals cut by `boundaries`.
///
/// The first and last boundary must equal the category's current minimum
/// and maximum score; `texts[i]` becomes the interpretation of band `i + 1`.
pub fn set_bands<S: AsRef<str>>(
    test: &TestDefinition,
    category: &CategoryId,
    boundaries: &[Decimal],
    texts: &[S],
) -> Result<TestDefinition, EditError> {
    if test.category(category).is_none() {
        return Err(EditError::UnknownCategory(category.clone()));
    }
    if boundaries.len() < 2 {
        return Err(EditError::TooFewBoundaries);
    }
    if let Some(pos) = boundaries.windows(2).position(|w| w[0] >= w[1]) {
        return Err(EditError::NonMonotoneBoundaries(pos + 1));
    }
    let intervals = boundaries.len() - 1;
    if texts.len() != intervals {
        return Err(EditError::TextCount {
            intervals,
            texts: texts.len(),
        });
    }
    if texts.iter().any(|t| t.as_ref().trim().is_empty()) {
        return Err(EditError::EmptyText("interpretation text"));
    }
    let (min, max) = score_bounds(test, category)?;
    let (first, last) = (boundaries[0], boundaries[intervals]);
    if first != min || last != max {
        return Err(EditError::EndpointMismatch {
            first,
            last,
            min,
            max,
        });
    }
    let mut out = test.clone();
    out.bands.retain(|b| &b.category_id != category);
    out.bands.extend(
        boundaries
            .windows(2)
            .zip(texts)
            .enumerate()
            .map(|(i, (w, text))| Band {
                category_id: category.clone(),
                index: i as u32 + 1,
                lower: w[0],
                upper: w[1],
                interpretation: text.as_ref().to_owned(),
            }),
    );
    Ok(out)
}
