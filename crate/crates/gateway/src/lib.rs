//! Operational surface of the test engine: the `psytest` command line and
//! the HTTP service that administers tests to respondents.

pub mod cli;
pub mod http;
pub mod run;
