use auxsig::ccp::{initialize, CcpConfig};
use auxsig::conic;
use auxsig::distance::{build_models, Phasor, PhasorModelSpec};
use auxsig::dual::build_ccp_subproblem;

fn main() {
    let z = Phasor::new(0.0, 0.0);
    let spec = PhasorModelSpec::new(z, z, z);
    let p = build_models(&spec);
    let config = CcpConfig {
        n_starts: 1,
        ..CcpConfig::default()
    };
    let (mut theta, mut b0, mut b1) = initialize(&p, &config, 0);
    let mut gamma = config.gamma0;
    for z in 0..30 {
        let sub = build_ccp_subproblem(&p, &theta, &b0, &b1, gamma).unwrap();
        let sol = conic::solve(&sub.program, 1e-6).unwrap();
        if sol.status != conic::SolveStatus::Optimal {
            println!("z={z} gamma={gamma:.1} status {:?}", sol.status);
            for v in &sol.violations {
                println!("   {v}");
            }
            break;
        }
        let it = sub.extract(&p, &sol);
        println!(
            "z={z} gamma={gamma:8.1} xi={:+.6e} |theta|={:.6e}",
            it.xi,
            it.theta.norm(),
        );
        theta = it.theta;
        b0 = it.beta_normal;
        b1 = it.beta_faulty;
        gamma = (gamma * config.zeta).min(config.gamma_max);
    }
}
