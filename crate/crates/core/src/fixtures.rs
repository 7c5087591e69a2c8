//! A small ready-made test: three yes/no statements scored on one
//! category that counts "Yes" answers.

use rust_decimal::Decimal;

use crate::model::{
    Band, Category, CategoryId, DemographicField, DemographicKind, Item, ScaleBinding, ScoreTuple,
    TestDefinition,
};

pub fn yes_no_counting_test() -> TestDefinition {
    let category = CategoryId::new("pos");
    let mut test = TestDefinition::new("yes-no", "Yes/No counting test", ["Yes", "No"]);
    test.instruction = "Answer each statement with Yes or No.".into();
    for (n, text) in [
        "I enjoy meeting new people.",
        "I often feel tense.",
        "I like to plan ahead.",
    ]
    .iter()
    .enumerate()
    {
        let ordinal = n as u32 + 1;
        test.items.push(Item {
            id: format!("q{ordinal}").into(),
            ordinal,
            text: (*text).into(),
        });
        test.bindings.push(ScaleBinding {
            category_id: category.clone(),
            item_id: format!("q{ordinal}").into(),
            tuple: ScoreTuple::from_ints(&[1, 0]),
        });
    }
    test.categories.push(Category {
        id: category.clone(),
        name: "Positive answers".into(),
    });
    test.bands = vec![
        Band {
            category_id: category.clone(),
            index: 1,
            lower: Decimal::ZERO,
            upper: Decimal::ONE,
            interpretation: "Few positive answers.".into(),
        },
        Band {
            category_id: category,
            index: 2,
            lower: Decimal::ONE,
            upper: Decimal::from(3),
            interpretation: "Mostly positive answers.".into(),
        },
    ];
    test.demographics = vec![
        DemographicField {
            name: "sex".into(),
            kind: DemographicKind::Choice(vec!["F".into(), "M".into()]),
        },
        DemographicField {
            name: "age".into(),
            kind: DemographicKind::Integer,
        },
    ];
    test
}
