use sstqp::conic::SolverSettings;
use sstqp::formulations::Family;
use sstqp::instances::{
    epsilon_via_sdp, generate, horn, separating_f, verify_instance, GeneratorConfig, VerifyOptions,
};
use sstqp::linalg::{min_eigenvalue, sym_eig};
use sstqp::oracle::{sparse_stqp_exact, stqp_exact, DEFAULT_BUDGET};

fn report(fam: Family, n: usize, rho0: usize, rho: usize, seed: u64) -> sstqp::instances::VerifyReport {
    let inst = generate(&GeneratorConfig::new(fam, n, rho0, rho, seed)).unwrap();
    let rep = verify_instance(&inst, &VerifyOptions::default()).unwrap();
    for c in &rep.checks {
        println!("{fam} seed {seed}: {} {} ({})", c.name, c.passed, c.detail);
    }
    rep
}

#[test]
fn psd_instance_passes_every_check() {
    let rep = report(Family::Psd, 10, 5, 2, 1);
    assert!(rep.passed());
    assert!(rep.min_eig.unwrap() >= -1e-8);
}

#[test]
fn spn_instance_passes_and_records_indefiniteness() {
    let rep = report(Family::Spn, 10, 5, 2, 2);
    assert!(rep.passed());
    assert!(rep.indefinite.is_some());
}

#[test]
fn cop_instance_has_negative_mu_and_zero_optimum() {
    let rep = report(Family::Cop, 10, 5, 2, 3);
    assert!(rep.passed());
    assert!(rep.mu.unwrap() < -1e-4);
    assert!(rep.l_n.unwrap().abs() <= 1e-8);
}

#[test]
fn designated_minimizer_is_feasible_when_rho_reaches_rho0() {
    let inst = generate(&GeneratorConfig::new(Family::Psd, 10, 5, 2, 4)).unwrap();
    let r = sparse_stqp_exact(&inst.q, 5, DEFAULT_BUDGET).unwrap();
    assert!(r.value.abs() <= 1e-9);
}

#[test]
fn optimized_separator_matches_tabulated_one() {
    let s = SolverSettings::default();
    let cert = epsilon_via_sdp(&s).unwrap();
    let tab = separating_f();
    println!("epsilon sdp {} tabulated {}", cert.epsilon, tab.epsilon);
    assert!((0.1039..=0.1069).contains(&cert.epsilon));
    assert!(cert.epsilon >= tab.epsilon - 1e-3);
    assert!((cert.epsilon - tab.epsilon).abs() <= 1e-3);
    assert!(min_eigenvalue(&cert.f).unwrap() >= -1e-7);
    assert!(cert.f.min_entry() >= -1e-7);
    assert!((horn().inner(&cert.f) + cert.delta).abs() <= 1e-12);
    assert!((cert.mu_sep - 1.0).abs() <= 1e-5);
}

#[test]
fn horn_facts() {
    let h = horn();
    assert!(stqp_exact(&h).unwrap().value.abs() <= 1e-9);
    let spec = sym_eig(&h).unwrap();
    assert!((spec.min() + 1.236).abs() < 1e-3);
    assert!((spec.max() - 3.236).abs() < 1e-3);
}
