//! Running a scenario from text and reading its report, as the CLI does.

use orbitkit::cli::{parse_scenario, run, RunOptions};

const SCENARIO: &str = r#"
name = "grushin-demo"
seed = 7

[[fields]]
kind = "builtin"
name = "grushin"

[lb]
radius = 4.0

[[commands]]
kind = "compose"
label = "hop"
point = [0.0, 0.0]
tau = [[0, 0.2], [1, 0.1]]

[[commands]]
kind = "verdict"
label = "verdict"
point_from = "hop"

[[commands]]
kind = "orbit-sample"
label = "cloud"
point = [0.0, 0.0]
budget = 200
max_word_len = 4
"#;

fn main() -> orbitkit::Result<()> {
    let scenario = parse_scenario(SCENARIO)?;
    let out = run(&scenario, "grushin_demo", &RunOptions::default());
    print!("{}", out.report);
    for a in &out.artifacts {
        println!("# {} ({} rows)", a.file_name, a.contents.lines().count() - 1);
    }
    println!("failed commands: {}", out.failed_commands);
    Ok(())
}
