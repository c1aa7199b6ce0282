//! Static scoring: API call counting, complexity classification, and the
//! mutation score that drives campaign branching.
//!
//! Run with: cargo run -p zfuzz --example score_programs

use zfuzz::scorer::{count_api_calls, mutation_score, weighted_report_score, ApiManifest};

fn main() -> zfuzz::Result<()> {
    let manifest = ApiManifest::minilang_default();
    println!("manifest: {} APIs\n", manifest.len());

    let programs = [
        ("straight line", "x = 1\ny = x + 2\nprint(y)\n"),
        (
            "three calls",
            "xs = [3, 1, 2]\nsort(xs)\nn = len(xs)\nprint(sum(xs) + n)\n",
        ),
        (
            "double loop",
            "acc = 0\nfor i in range(3):\n    for j in range(3):\n        acc = acc + abs(i - j)\nprint(acc)\n",
        ),
        (
            "recursion",
            "def fib(n):\n    if n < 2:\n        return n\n    return fib(n - 1) + fib(n - 2)\nprint(fib(10))\n",
        ),
        (
            "hallucinated call",
            "value = quantum_entangle(7)\nprint(value)\n",
        ),
    ];

    for (label, source) in programs {
        match mutation_score(source, &manifest) {
            Ok(score) => {
                let calls = count_api_calls(source, &manifest)?;
                println!(
                    "{label:>18}: n_api={} complexity={} total={}  apis={:?} unknown={:?}",
                    score.n_api,
                    score.complexity,
                    score.total,
                    calls.distinct_apis,
                    calls.unknown_calls
                );
            }
            Err(e) => println!("{label:>18}: unscorable ({e})"),
        }
    }

    // The report-only weighted form.
    let weighted = weighted_report_score(4, 0.9, 1.0, 2.0)?;
    println!("\nweighted report score (C=4, A=0.9, lambda=1, mu=2): {weighted}");
    Ok(())
}
