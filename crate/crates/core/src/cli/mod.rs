//! Batch interface: scenario files in, reports and point clouds out.
//!
//! Exit codes: 0 success, 1 a command failed or a file could not be read or
//! written, 2 the scenario did not parse or validate.

pub mod run;
pub mod scenario;

use std::path::Path;

use crate::catalog::BUILTINS;
use crate::error::Error;

pub use run::{run, run_to_dir, Artifact, RunOptions, RunOutput};
pub use scenario::{emit_scenario, parse_scenario, CommandKind, CommandSpec, FieldKind, FieldSpec, Scenario};

pub const EXIT_OK: i32 = 0;
pub const EXIT_COMMAND_ERROR: i32 = 1;
pub const EXIT_PARSE_ERROR: i32 = 2;

/// One line per builtin family.
pub fn catalog_listing() -> String {
    let width = BUILTINS.iter().map(|(n, _)| n.len()).max().unwrap_or(0);
    BUILTINS
        .iter()
        .map(|(name, desc)| format!("{name:width$}  {desc}\n"))
        .collect()
}

fn load(path: &Path) -> Result<Scenario, Error> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario(&text)
}

/// An unreadable file is a command error; anything else from loading is a parse error.
fn load_failure(path: &Path, e: Error) -> (i32, String) {
    let code = match e {
        Error::Io(_) => EXIT_COMMAND_ERROR,
        _ => EXIT_PARSE_ERROR,
    };
    (code, format!("{}: {e}\n", path.display()))
}

fn stem_of(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("scenario")
        .to_string()
}

/// `orbitkit check`: parse and validate only.
pub fn check_command(path: &Path) -> (i32, String) {
    match load(path) {
        Ok(s) => (
            EXIT_OK,
            format!("{}: ok ({} fields, {} commands)\n", path.display(), s.fields.len(), s.commands.len()),
        ),
        Err(e) => load_failure(path, e),
    }
}

/// `orbitkit run`: writes the report and clouds into `out`.
pub fn run_command(path: &Path, out: &Path, opts: &RunOptions) -> (i32, String) {
    let scenario = match load(path) {
        Ok(s) => s,
        Err(e) => return load_failure(path, e),
    };
    match run_to_dir(&scenario, &stem_of(path), opts, out) {
        Ok((result, files)) => {
            let mut msg = String::new();
            for f in files {
                msg.push_str(&format!("wrote {}\n", f.display()));
            }
            if result.succeeded() {
                (EXIT_OK, msg)
            } else {
                msg.push_str(&format!("{} command(s) failed; see the report\n", result.failed_commands));
                (EXIT_COMMAND_ERROR, msg)
            }
        }
        Err(e) => (EXIT_COMMAND_ERROR, format!("{e}\n")),
    }
}
