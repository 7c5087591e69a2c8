//! Terminal administration of one test: instruction, demographic prompts,
//! then one item at a time with numbered answer options.

use std::io::{self, BufRead, Write};

use chrono::{DateTime, Utc};
use psytest_core::executor::{
    current_item, open_session, record_demographics, score_session, submit_answer_at, CurrentItem,
    Demographics, ExecError, Session, SessionResult,
};
use psytest_core::{DemographicField, DemographicKind, DemographicValue, TestDefinition};

pub struct RunOptions<'a> {
    pub session_id: String,
    pub show_interpretation: bool,
    pub clock: &'a dyn Fn() -> DateTime<Utc>,
}

#[derive(Debug)]
pub enum RunOutcome {
    Completed(Box<(Session, SessionResult)>),
    /// Input ended before the last item was answered.
    Interrupted,
}

#[derive(Debug)]
pub enum RunError {
    Io(io::Error),
    Exec(ExecError),
}

impl From<io::Error> for RunError {
    fn from(e: io::Error) -> Self {
        RunError::Io(e)
    }
}

impl From<ExecError> for RunError {
    fn from(e: ExecError) -> Self {
        RunError::Exec(e)
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Io(e) => write!(f, "i/o error: {e}"),
            RunError::Exec(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for RunError {}

fn read_line<R: BufRead>(input: &mut R) -> io::Result<Option<String>> {
    let mut line = String::new();
    if input.read_line(&mut line)? == 0 {
        return Ok(None);
    }
    Ok(Some(line.trim().to_owned()))
}

fn parse_demographic(field: &DemographicField, raw: &str) -> Result<DemographicValue, String> {
    match &field.kind {
        DemographicKind::Text if raw.is_empty() => Err("A value is required.".into()),
        DemographicKind::Text => Ok(DemographicValue::Text(raw.to_owned())),
        DemographicKind::Integer => raw
            .parse()
            .map(DemographicValue::Integer)
            .map_err(|_| "Please enter a whole number.".into()),
        DemographicKind::Choice(choices) => {
            if let Some(c) = choices.iter().find(|c| c.as_str() == raw) {
                return Ok(DemographicValue::Text(c.clone()));
            }
            match raw.parse::<usize>() {
                Ok(n) if (1..=choices.len()).contains(&n) => {
                    Ok(DemographicValue::Text(choices[n - 1].clone()))
                }
                _ => Err(format!("Please choose one of: {}.", choices.join(", "))),
            }
        }
    }
}

fn prompt_label(field: &DemographicField) -> String {
    match &field.kind {
        DemographicKind::Text => format!("{}: ", field.name),
        DemographicKind::Integer => format!("{} (number): ", field.name),
        DemographicKind::Choice(c) => format!("{} ({}): ", field.name, c.join("/")),
    }
}

/// Administers `test` reading answers from `input`. Invalid input is
/// re-prompted; end of input before completion yields
/// [`RunOutcome::Interrupted`].
pub fn run_session<R: BufRead, W: Write>(
    test: &TestDefinition,
    input: &mut R,
    out: &mut W,
    opts: &RunOptions<'_>,
) -> Result<RunOutcome, RunError> {
    let mut session = open_session(test, opts.session_id.clone(), (opts.clock)())?;

    writeln!(out, "{}", test.title)?;
    if !test.instruction.is_empty() {
        writeln!(out, "\n{}", test.instruction)?;
    }
    writeln!(out)?;

    let mut demographics = Demographics::new();
    for field in &test.demographics {
        loop {
            write!(out, "{}", prompt_label(field))?;
            out.flush()?;
            let Some(raw) = read_line(input)? else {
                return Ok(RunOutcome::Interrupted);
            };
            match parse_demographic(field, &raw) {
                Ok(v) => {
                    demographics.insert(field.name.clone(), v);
                    break;
                }
                Err(msg) => writeln!(out, "{msg}")?,
            }
        }
    }
    session = record_demographics(&session, test, demographics)?;

    let total = test.items.len();
    let k = test.answer_set.len();
    while let CurrentItem::Item(item) = current_item(&session, test) {
        writeln!(out, "\n[{}/{}] {}", item.ordinal, total, item.text)?;
        for (i, option) in test.answer_set.options.iter().enumerate() {
            writeln!(out, "  {}) {}", i + 1, option)?;
        }
        let index = loop {
            write!(out, "> ")?;
            out.flush()?;
            let Some(raw) = read_line(input)? else {
                return Ok(RunOutcome::Interrupted);
            };
            match raw.parse::<usize>() {
                Ok(n) if (1..=k).contains(&n) => break n - 1,
                _ => writeln!(out, "Please enter a number between 1 and {k}.")?,
            }
        };
        session = submit_answer_at(&session, test, index, (opts.clock)())?;
    }

    let result = score_session(&session, test)?;
    writeln!(out, "\nThe test is complete. Thank you.")?;
    if opts.show_interpretation {
        writeln!(out, "\nInterpretation")?;
        for r in &result.categories {
            let name = test
                .category(&r.category_id)
                .map_or(r.category_id.as_str(), |c| c.name.as_str());
            writeln!(
                out,
                "  {name}: {} (score {}, band {})",
                r.interpretation, r.raw_score, r.band_index
            )?;
        }
    }
    Ok(RunOutcome::Completed(Box::new((session, result))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use psytest_core::fixtures::yes_no_counting_test;

    fn fixed() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2024, 6, 1, 10, 0, 0).unwrap()
    }

    fn run(script: &str, show: bool) -> (RunOutcome, String) {
        let test = yes_no_counting_test();
        let mut out = Vec::new();
        let opts = RunOptions {
            session_id: "s".into(),
            show_interpretation: show,
            clock: &fixed,
        };
        let outcome = run_session(&test, &mut script.as_bytes(), &mut out, &opts).unwrap();
        (outcome, String::from_utf8(out).unwrap())
    }

    #[test]
    fn scripted_session_completes() {
        let (outcome, text) = run("F\n34\n1\n2\n1\n", false);
        let RunOutcome::Completed(done) = outcome else {
            panic!("expected completion")
        };
        assert_eq!(done.1.categories[0].raw_score, 2.into());
        assert!(text.contains("[1/3] I enjoy meeting new people."));
        assert!(text.contains("  2) No"));
        assert!(!text.contains("Interpretation"));
    }

    #[test]
    fn invalid_input_is_reprompted() {
        let (outcome, text) = run("X\n2\nold\n34\n3\nyes\n1\n1\n1\n", true);
        assert!(matches!(outcome, RunOutcome::Completed(_)));
        assert!(text.contains("Please choose one of: F, M."));
        assert!(text.contains("Please enter a whole number."));
        assert_eq!(
            text.matches("Please enter a number between 1 and 2.")
                .count(),
            2
        );
        assert!(text.contains("Positive answers: Mostly positive answers. (score 3, band 2)"));
    }

    #[test]
    fn end_of_input_interrupts() {
        let (outcome, _) = run("F\n34\n1\n", false);
        assert!(matches!(outcome, RunOutcome::Interrupted));
        let (outcome, _) = run("", false);
        assert!(matches!(outcome, RunOutcome::Interrupted));
    }
}
