//! Domain types for an authored personality test.
//!
//! A [`TestDefinition`] is the aggregate of everything an author produces:
//! the items and their presentation order, the shared answer set, the
//! psychological categories, the per-category scales (stored as
//! [`ScaleBinding`] records) and the norm bands with their interpretation
//! texts. Construction never validates; call [`crate::validate`] for that.

use std::collections::BTreeMap;
use std::fmt;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

/// Stable identity of an item. Unlike the ordinal, it never changes when
/// items are inserted, deleted or moved.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemId(pub String);

/// Stable identity of a psychological category.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CategoryId(pub String);

macro_rules! id_impls {
    ($ty:ident) => {
        impl $ty {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $ty {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $ty {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

id_impls!(ItemId);
id_impls!(CategoryId);

/// Answers given by a respondent, keyed by item, valued by answer index.
pub type AnswerMap = BTreeMap<ItemId, usize>;

/// The ordered list of answer options shared by every item of a test.
///
/// Score tuples index into this list, so its order is part of the test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswerSet {
    pub options: Vec<String>,
}

impl AnswerSet {
    pub fn new<S: Into<String>>(options: impl IntoIterator<Item = S>) -> Self {
        Self {
            options: options.into_iter().map(Into::into).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.options.len()
    }

    pub fn is_empty(&self) -> bool {
        self.options.is_empty()
    }
}

/// One question or statement. `ordinal` is its position in 1..=m.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Item {
    pub id: ItemId,
    pub ordinal: u32,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Category {
    pub id: CategoryId,
    pub name: String,
}

/// Points earned for each answer option; `values[i]` belongs to option `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreTuple {
    pub values: Vec<Decimal>,
}

impl ScoreTuple {
    pub fn new(values: impl IntoIterator<Item = Decimal>) -> Self {
        Self {
            values: values.into_iter().collect(),
        }
    }

    /// Convenience constructor for integer-valued tuples.
    pub fn from_ints(values: &[i64]) -> Self {
        Self::new(values.iter().map(|&v| Decimal::from(v)))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Smallest value of the tuple; `None` for an empty tuple.
    pub fn min(&self) -> Option<Decimal> {
        self.values.iter().copied().min()
    }

    /// Largest value of the tuple; `None` for an empty tuple.
    pub fn max(&self) -> Option<Decimal> {
        self.values.iter().copied().max()
    }

    pub fn is_constant(&self) -> bool {
        self.values.windows(2).all(|w| w[0] == w[1])
    }
}

/// One record of the scale relation: category `c` awards `tuple` for item `q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScaleBinding {
    pub category_id: CategoryId,
    pub item_id: ItemId,
    pub tuple: ScoreTuple,
}

/// One norm interval of a category together with its interpretation text.
///
/// Band 1 is `[lower, upper]`; every later band is `(lower, upper]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Band {
    pub category_id: CategoryId,
    pub index: u32,
    pub lower: Decimal,
    pub upper: Decimal,
    pub interpretation: String,
}

impl Band {
    /// Only the first band of a category includes its lower boundary.
    pub fn closed_lower(&self) -> bool {
        self.index == 1
    }

    pub fn contains(&self, score: Decimal) -> bool {
        let above_lower = if self.closed_lower() {
            score >= self.lower
        } else {
            score > self.lower
        };
        above_lower && score <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DemographicKind {
    Text,
    Integer,
    Choice(Vec<String>),
}

impl DemographicKind {
    pub fn name(&self) -> &'static str {
        match self {
            DemographicKind::Text => "text",
            DemographicKind::Integer => "integer",
            DemographicKind::Choice(_) => "choice",
        }
    }
}

/// One declared respondent attribute (sex, age, education, ...).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemographicField {
    pub name: String,
    pub kind: DemographicKind,
}

/// A demographic value as supplied by a respondent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DemographicValue {
    Integer(i64),
    Text(String),
}

impl fmt::Display for DemographicValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DemographicValue::Integer(v) => write!(f, "{v}"),
            DemographicValue::Text(v) => f.write_str(v),
        }
    }
}

/// The complete authored test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestDefinition {
    pub test_id: String,
    pub title: String,
    pub instruction: String,
    pub answer_set: AnswerSet,
    pub items: Vec<Item>,
    pub categories: Vec<Category>,
    pub bindings: Vec<ScaleBinding>,
    pub bands: Vec<Band>,
    pub demographics: Vec<DemographicField>,
}

impl TestDefinition {
    /// An empty test with the given answer options.
    pub fn new<S: Into<String>>(
        test_id: impl Into<String>,
        title: impl Into<String>,
        answers: impl IntoIterator<Item = S>,
    ) -> Self {
        Self {
            test_id: test_id.into(),
            title: title.into(),
            instruction: String::new(),
            answer_set: AnswerSet::new(answers),
            items: Vec::new(),
            categories: Vec::new(),
            bindings: Vec::new(),
            bands: Vec::new(),
            demographics: Vec::new(),
        }
    }

    pub fn item(&self, id: &ItemId) -> Option<&Item> {
        self.items.iter().find(|i| &i.id == id)
    }

    pub fn item_at(&self, ordinal: u32) -> Option<&Item> {
        self.items.iter().find(|i| i.ordinal == ordinal)
    }

    pub fn category(&self, id: &CategoryId) -> Option<&Category> {
        self.categories.iter().find(|c| &c.id == id)
    }

    pub fn category_by_name(&self, name: &str) -> Option<&Category> {
        self.categories.iter().find(|c| c.name == name)
    }

    /// Items sorted by ordinal, i.e. in presentation order.
    pub fn items_in_order(&self) -> Vec<&Item> {
        let mut items: Vec<&Item> = self.items.iter().collect();
        items.sort_by_key(|i| i.ordinal);
        items
    }

    /// Scale records of one category.
    pub fn bindings_of<'a>(
        &'a self,
        category: &'a CategoryId,
    ) -> impl Iterator<Item = &'a ScaleBinding> + 'a {
        self.bindings
            .iter()
            .filter(move |b| &b.category_id == category)
    }

    /// Items the category's scale is defined on.
    pub fn bound_items(&self, category: &CategoryId) -> Vec<&ItemId> {
        self.bindings
            .iter()
            .filter(|b| &b.category_id == category)
            .map(|b| &b.item_id)
            .collect()
    }

    /// Bands of one category sorted by index.
    pub fn bands_of(&self, category: &CategoryId) -> Vec<&Band> {
        let mut bands: Vec<&Band> = self
            .bands
            .iter()
            .filter(|b| &b.category_id == category)
            .collect();
        bands.sort_by_key(|b| b.index);
        bands
    }

    /// Interpretation texts of one category in band order.
    pub fn interpretations(&self, category: &CategoryId) -> Vec<&str> {
        self.bands_of(category)
            .into_iter()
            .map(|b| b.interpretation.as_str())
            .collect()
    }

    /// Items bound to no category. They are presented but never scored.
    pub fn inert_items(&self) -> Vec<&Item> {
        self.items
            .iter()
            .filter(|i| !self.bindings.iter().any(|b| b.item_id == i.id))
            .collect()
    }
}

/// Score and interpretation of one category for one administration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryResult {
    pub category_id: CategoryId,
    pub raw_score: Decimal,
    pub band_index: u32,
    pub interpretation: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn band(index: u32, lower: i64, upper: i64) -> Band {
        Band {
            category_id: "c".into(),
            index,
            lower: lower.into(),
            upper: upper.into(),
            interpretation: "t".into(),
        }
    }

    #[test]
    fn first_band_is_closed_below() {
        let b = band(1, 0, 1);
        assert!(b.contains(0.into()));
        assert!(b.contains(1.into()));
        assert!(!b.contains(2.into()));
    }

    #[test]
    fn later_bands_are_open_below() {
        let b = band(2, 1, 3);
        assert!(!b.contains(1.into()));
        assert!(b.contains(Decimal::new(101, 2)));
        assert!(b.contains(3.into()));
    }

    #[test]
    fn tuple_extremes() {
        let t = ScoreTuple::from_ints(&[3, -2, 0]);
        assert_eq!(t.min(), Some((-2).into()));
        assert_eq!(t.max(), Some(3.into()));
        assert!(!t.is_constant());
        assert!(ScoreTuple::from_ints(&[5, 5]).is_constant());
    }
}
