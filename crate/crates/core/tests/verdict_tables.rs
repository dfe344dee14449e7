use nsdp::cq::{nlp_constant_rank_check, run_check, CheckOptions, CqKind};
use nsdp::fixtures::fixtures;

#[test]
fn every_fixture_matches_its_expected_table() {
    let mut mismatches = Vec::new();
    for f in fixtures() {
        let xbar = f.reference.clone().unwrap();
        let opts = CheckOptions {
            curves: f.curves.clone(),
            ..CheckOptions::default()
        };
        for kind in CqKind::ALL {
            let v = run_check(&f.problem, &xbar, kind, &opts).unwrap();
            let want = f.expected[&kind];
            eprintln!("{:24} {:20} {:20} {:?}", f.name, kind.name(), v.status.name(), v.note);
            if v.status != want {
                mismatches.push(format!("{} {}: got {} want {}", f.name, kind, v.status, want));
            }
        }
        if let Some(nlp) = &f.nlp {
            for (kind, want) in &f.nlp_expected {
                let v = nlp_constant_rank_check(nlp, &xbar, *kind, &opts).unwrap();
                if v.status != *want {
                    mismatches.push(format!("{} nlp {:?}: got {} want {}", f.name, kind, v.status, want));
                }
            }
        }
    }
    assert!(mismatches.is_empty(), "{}", mismatches.join("\n"));
}
