use flowperiod::acceptance::{run_criterion, CRITERIA};

const SEED: u64 = 20240611;

#[test]
fn acceptance() {
    let mut failed = Vec::new();
    for (id, _) in CRITERIA {
        let r = run_criterion(id, SEED);
        println!("{}", r.line());
        for d in &r.details {
            println!("    {d}");
        }
        if !r.passed {
            failed.push(r.id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
