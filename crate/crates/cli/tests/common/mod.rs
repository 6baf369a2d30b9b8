#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

pub fn dess(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dess")).args(args).output().expect("run dess")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Three short trials: 100 ticks, the first 20 discarded, two windows each.
pub fn write_short_trials(path: &Path) {
    let text = r#"
[[trial]]
trial_id = "a"
condition = "both"
seed = 1
segment_ticks = 100
discard_ticks = 20

[[trial]]
trial_id = "b"
condition = "trail_only"
added_delay_ticks = 4
seed = 2
segment_ticks = 100
discard_ticks = 20

[[trial]]
trial_id = "c"
condition = "both"
added_delay_ticks = -4
added_rate_bits = 3
seed = 3
segment_ticks = 100
discard_ticks = 20
"#;
    std::fs::write(path, text).unwrap();
}
