mod common;

#[test]
fn successive_conditional_matches_prior() {
    let rep = common::geweke::run(20_000, 3);
    for m in &rep.moments {
        println!(
            "{:>18} prior {:>10.4} chain {:>10.4} z {:>6.2}",
            m.name, m.prior, m.chain, m.z
        );
    }
    let w = rep.worst();
    assert!(rep.passed(), "{} off by {:.2} SE", w.name, w.z);
}
