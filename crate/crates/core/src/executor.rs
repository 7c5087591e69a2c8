//! Administering a test to one respondent.
//!
//! A [`Session`] moves from collecting demographics, through answering the
//! items strictly in ordinal order, to completed. There is no skipping and
//! no going back. Scoring is a separate step ([`score_session`]) that is
//! only defined for completed sessions.

use std::collections::{BTreeMap, HashSet};

use chrono::{DateTime, Utc};
use thiserror::Error;
use uuid::Uuid;

use crate::model::{
    AnswerMap, CategoryResult, DemographicKind, DemographicValue, Item, ItemId, TestDefinition,
};
use crate::scoring::{score_all, ScoreError};
use crate::validate::{errors, Violation};

pub type Demographics = BTreeMap<String, DemographicValue>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionState {
    CollectingDemographics,
    InProgress,
    Completed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Answer {
    pub item_id: ItemId,
    pub answer_index: usize,
    pub ts: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub session_id: String,
    pub test_id: String,
    pub demographics: Demographics,
    pub answers: Vec<Answer>,
    pub state: SessionState,
    pub started_at: DateTime<Utc>,
    pub completed_at: Option<DateTime<Utc>>,
}

impl Session {
    pub fn answer_map(&self) -> AnswerMap {
        self.answers
            .iter()
            .map(|a| (a.item_id.clone(), a.answer_index))
            .collect()
    }

    pub fn is_completed(&self) -> bool {
        self.state == SessionState::Completed
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionResult {
    pub session_id: String,
    pub categories: Vec<CategoryResult>,
}

/// What the respondent should see next.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurrentItem<'a> {
    Item(&'a Item),
    Done,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("test is invalid ({} violation(s))", .0.len())]
    InvalidTest(Vec<Violation>),
    #[error("demographic field `{0}` is missing")]
    MissingDemographic(String),
    #[error("demographic field `{0}` is not declared by the test")]
    UnknownDemographic(String),
    #[error("demographic field `{field}` must be {expected}")]
    IllTypedDemographic {
        field: String,
        expected: &'static str,
    },
    #[error("`{value}` is not one of the choices of demographic field `{field}`")]
    InvalidChoice { field: String, value: String },
    #[error("demographics have not been recorded yet")]
    AwaitingDemographics,
    #[error("demographics were already recorded")]
    DemographicsAlreadyRecorded,
    #[error("answer index {index} is out of range 0..{options}")]
    AnswerOutOfRange { index: usize, options: usize },
    #[error("session is already completed")]
    SessionCompleted,
    #[error("session is not completed")]
    NotCompleted,
    #[error("session belongs to test `{session}` but test `{test}` was given")]
    TestMismatch { session: String, test: String },
    #[error(transparent)]
    Score(#[from] ScoreError),
}

fn check_test(test: &TestDefinition) -> Result<(), ExecError> {
    let errs = errors(test);
    if errs.is_empty() {
        Ok(())
    } else {
        Err(ExecError::InvalidTest(errs))
    }
}

fn check_same_test(session: &Session, test: &TestDefinition) -> Result<(), ExecError> {
    if session.test_id == test.test_id {
        Ok(())
    } else {
        Err(ExecError::TestMismatch {
            session: session.test_id.clone(),
            test: test.test_id.clone(),
        })
    }
}

/// Checks that `demographics` supplies exactly the fields the test declares,
/// each with a value of the declared kind.
pub fn check_demographics(
    test: &TestDefinition,
    demographics: &Demographics,
) -> Result<(), ExecError> {
    for name in demographics.keys() {
        if !test.demographics.iter().any(|f| &f.name == name) {
            return Err(ExecError::UnknownDemographic(name.clone()));
        }
    }
    for field in &test.demographics {
        let value = demographics
            .get(&field.name)
            .ok_or_else(|| ExecError::MissingDemographic(field.name.clone()))?;
        let ill_typed = |expected| ExecError::IllTypedDemographic {
            field: field.name.clone(),
            expected,
        };
        match (&field.kind, value) {
            (DemographicKind::Text, DemographicValue::Text(_)) => {}
            (DemographicKind::Text, _) => return Err(ill_typed("text")),
            (DemographicKind::Integer, DemographicValue::Integer(_)) => {}
            (DemographicKind::Integer, _) => return Err(ill_typed("an integer")),
            (DemographicKind::Choice(choices), DemographicValue::Text(v)) => {
                if !choices.contains(v) {
                    return Err(ExecError::InvalidChoice {
                        field: field.name.clone(),
                        value: v.clone(),
                    });
                }
            }
            (DemographicKind::Choice(_), _) => return Err(ill_typed("one of the listed choices")),
        }
    }
    Ok(())
}

/// Opens a session that still has to collect demographics.
pub fn open_session(
    test: &TestDefinition,
    session_id: impl Into<String>,
    now: DateTime<Utc>,
) -> Result<Session, ExecError> {
    check_test(test)?;
    Ok(Session {
        session_id: session_id.into(),
        test_id: test.test_id.clone(),
        demographics: Demographics::new(),
        answers: Vec::new(),
        state: SessionState::CollectingDemographics,
        started_at: now,
        completed_at: None,
    })
}

pub fn record_demographics(
    session: &Session,
    test: &TestDefinition,
    demographics: Demographics,
) -> Result<Session, ExecError> {
    check_same_test(session, test)?;
    if session.state != SessionState::CollectingDemographics {
        return Err(ExecError::DemographicsAlreadyRecorded);
    }
    check_demographics(test, &demographics)?;
    let mut next = session.clone();
    next.demographics = demographics;
    next.state = if test.items.is_empty() {
        SessionState::Completed
    } else {
        SessionState::InProgress
    };
    if next.state == SessionState::Completed {
        next.completed_at = Some(next.started_at);
    }
    Ok(next)
}

/// Starts a session with a fresh id at the current time.
pub fn start_session(
    test: &TestDefinition,
    demographics: Demographics,
) -> Result<Session, ExecError> {
    start_session_with(test, demographics, Uuid::new_v4().to_string(), Utc::now())
}

pub fn start_session_with(
    test: &TestDefinition,
    demographics: Demographics,
    session_id: impl Into<String>,
    now: DateTime<Utc>,
) -> Result<Session, ExecError> {
    let session = open_session(test, session_id, now)?;
    record_demographics(&session, test, demographics)
}

/// The unanswered item with the smallest ordinal.
pub fn current_item<'a>(session: &Session, test: &'a TestDefinition) -> CurrentItem<'a> {
    let answered: HashSet<&ItemId> = session.answers.iter().map(|a| &a.item_id).collect();
    test.items
        .iter()
        .filter(|i| !answered.contains(&i.id))
        .min_by_key(|i| i.ordinal)
        .map_or(CurrentItem::Done, CurrentItem::Item)
}

pub fn submit_answer(
    session: &Session,
    test: &TestDefinition,
    answer_index: usize,
) -> Result<Session, ExecError> {
    submit_answer_at(session, test, answer_index, Utc::now())
}

/// Records `answer_index` against the current item.
pub fn submit_answer_at(
    session: &Session,
    test: &TestDefinition,
    answer_index: usize,
    now: DateTime<Utc>,
) -> Result<Session, ExecError> {
    check_same_test(session, test)?;
    match session.state {
        SessionState::CollectingDemographics => return Err(ExecError::AwaitingDemographics),
        SessionState::Completed => return Err(ExecError::SessionCompleted),
        SessionState::InProgress => {}
    }
    let options = test.answer_set.len();
    if answer_index >= options {
        return Err(ExecError::AnswerOutOfRange {
            index: answer_index,
            options,
        });
    }
    let item = match current_item(session, test) {
        CurrentItem::Item(item) => item,
        CurrentItem::Done => return Err(ExecError::SessionCompleted),
    };
    let mut next = session.clone();
    next.answers.push(Answer {
        item_id: item.id.clone(),
        answer_index,
        ts: now,
    });
    if current_item(&next, test) == CurrentItem::Done {
        next.state = SessionState::Completed;
        next.completed_at = Some(now);
    }
    Ok(next)
}

/// Raw score, band and interpretation of every category.
pub fn score_session(session: &Session, test: &TestDefinition) -> Result<SessionResult, ExecError> {
    check_same_test(session, test)?;
    if !session.is_completed() {
        return Err(ExecError::NotCompleted);
    }
    Ok(SessionResult {
        session_id: session.session_id.clone(),
        categories: score_all(test, &session.answer_map())?,
    })
}
