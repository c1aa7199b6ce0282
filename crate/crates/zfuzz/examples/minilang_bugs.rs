//! The bundled MiniLang interpreter and its planted bugs, run in process:
//! each canonical trigger behaves normally on a healthy interpreter and
//! fires deterministically when its bug is enabled.
//!
//! B4 (hang) and B5 (process abort) are shown by description only here —
//! they would stall or kill this process; the executor demos run them in a
//! subprocess sandbox instead.
//!
//! Run with: cargo run -p zfuzz --example minilang_bugs

use zfuzz::minilang::{canonical_trigger, run_source, BugConfig, PlantedBug};

fn show(bug: PlantedBug) {
    let trigger = canonical_trigger(bug);
    println!("==== {} ({}) ====", bug.short_id(), bug.long_id());
    println!("trigger:\n{}", indent(trigger));

    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run_source(trigger, &BugConfig::none(), 7, &mut out, &mut err);
    println!("healthy: exit {code}, stdout {:?}", String::from_utf8_lossy(&out));

    if matches!(bug, PlantedBug::B4SortHang | PlantedBug::B5PowAbort) {
        println!(
            "enabled: ({} — run under the executor sandbox; expected signature {})\n",
            if bug == PlantedBug::B4SortHang {
                "would hang this process"
            } else {
                "would abort this process"
            },
            bug.signature()
        );
        return;
    }
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run_source(trigger, &BugConfig::with([bug]), 7, &mut out, &mut err);
    println!(
        "enabled: exit {code}, stderr {:?}",
        String::from_utf8_lossy(&err)
    );
    println!("expected executor signature: {}\n", bug.signature());
}

fn indent(text: &str) -> String {
    text.lines()
        .map(|l| format!("    {l}"))
        .collect::<Vec<_>>()
        .join("\n")
}

fn main() {
    for bug in PlantedBug::ALL {
        show(bug);
    }

    println!("==== determinism ====");
    let src = "seed(5)\nprint(random_si64(0, 100))\nprint(random_float64())\n";
    for _ in 0..2 {
        let mut out = Vec::new();
        let mut err = Vec::new();
        run_source(src, &BugConfig::none(), 7, &mut out, &mut err);
        print!("{}", String::from_utf8_lossy(&out));
    }
    println!("(same seed, same sequence)");
}
