use vou::validation::{run_criterion, CRITERIA};

fn main() {
    // `cargo test --test acceptance -- 3 5` runs a subset
    let picked: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let ids: Vec<usize> = if picked.is_empty() { CRITERIA.iter().map(|c| c.0).collect() } else { picked };
    let mut failed = 0;
    for id in ids {
        let r = run_criterion(id);
        println!("{}", r.line());
        if !r.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
