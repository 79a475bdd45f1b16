use fblsec::baselines::mrt_precoder;
use fblsec::channel::{generate_drop, ScenarioConfig};
use fblsec::forms::build_forms;
use fblsec::gpi::{gpi_solve, GpiObjective, GpiSettings};
use fblsec::math::FblParams;
use fblsec::reliability::ReliabilityCaps;
use fblsec::EveUserMat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn params_at(p_dbm: f64) -> FblParams {
    FblParams {
        blocklength: 200,
        symbol_power: fblsec::channel::dbm_to_watts(p_dbm),
        noise_user: fblsec::channel::dbm_to_watts(-99.0),
        noise_eve: fblsec::channel::dbm_to_watts(-99.0),
        alpha: 10.0,
        weight: 0.01,
    }
}

fn main() {
    // Iteration-count quantiles per power over 100 default drops.
    for &p_dbm in &[-10.0, 0.0, 10.0, 20.0] {
        let mut iters: Vec<usize> = Vec::new();
        for drop_idx in 0..100 {
            let scenario = ScenarioConfig { seed: fblsec::harness::derive_drop_seed(0xC0117, (p_dbm + 10.0) as usize, drop_idx), ..Default::default() };
            let channels = generate_drop(&scenario).unwrap();
            let params = params_at(p_dbm);
            let forms = build_forms(&channels, &params);
            let caps = ReliabilityCaps::evenly_spaced(4, 4, 1e-6, 2e-6);
            let init = fblsec::baselines::baseline_precoder(fblsec::baselines::BaselineKind::Rzf, &channels, &params).unwrap();
            let run = gpi_solve(
                &forms,
                GpiObjective::Secrecy { eps: &caps.eps_hat, delta: &caps.delta_hat },
                &params,
                &GpiSettings { tolerance: 0.01, max_iters: 80, refresh_anchors: true },
                &init,
            ).unwrap();
            iters.push(run.iterations_to_reach(0.01).unwrap_or(999));
        }
        iters.sort();
        let q = |p: f64| iters[((iters.len() as f64 - 1.0) * p) as usize];
        let within = |t: usize| iters.iter().filter(|&&x| x <= t).count();
        println!("P={p_dbm:>5}: med={} q80={} q95={} max={} | within6={} within15={}",
            q(0.5), q(0.8), q(0.95), iters.last().unwrap(), within(6), within(15));
    }

    // Criterion-2 style synthetic instances: do all 50 now converge tight?
    let mut rng = ChaCha8Rng::seed_from_u64(0x2222);
    let (n, k, m) = (4usize, 2usize, 2usize);
    let mut worst_res: f64 = 0.0;
    let mut not_conv = 0;
    for trial in 0..50 {
        let mut gauss_vec = |rng: &mut ChaCha8Rng| {
            fblsec::CVec::from_fn(n, |_, _| {
                let re: f64 = rng.sample(rand_distr::StandardNormal);
                let im: f64 = rng.sample(rand_distr::StandardNormal);
                fblsec::C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
            })
        };
        let channels = fblsec::channel::ChannelRealization {
            h: (0..k).map(|_| gauss_vec(&mut rng)).collect(),
            g: (0..m).map(|_| gauss_vec(&mut rng)).collect(),
            gamma: (0..k).map(|_| 1e-9f64 * (1e3f64).powf(rng.gen::<f64>())).collect(),
            gamma_e: (0..m).map(|_| 1e-9f64 * (1e3f64).powf(rng.gen::<f64>())).collect(),
            cov_user: (0..k).map(|_| fblsec::CMat::identity(n, n)).collect(),
            cov_eve: (0..m).map(|_| fblsec::CMat::identity(n, n)).collect(),
            aod_user: vec![0.0; k], aod_eve: vec![0.0; m],
            user_pos: vec![[10.0, 0.0]; k], eve_pos: vec![[12.0, 0.0]; m],
            eve_anchor: vec![0; m], noise_power: 1e-12,
        };
        let params = params_at(20.0);
        let forms = build_forms(&channels, &params);
        let eps = vec![1e-6, 2e-6];
        let delta = EveUserMat::from_fn(m, k, |mi, ki| 1e-6 * (1.0 + 0.3*(mi+ki) as f64));
        let init = mrt_precoder(&channels).unwrap();
        let run = gpi_solve(
            &forms,
            GpiObjective::Secrecy { eps: &eps, delta: &delta },
            &params,
            &GpiSettings::tight(),
            &init,
        ).unwrap();
        if !run.converged { not_conv += 1; println!("  trial {trial} NOT converged, residual {:.3e}, iters {}", run.kkt_residual, run.iterations); }
        worst_res = worst_res.max(run.kkt_residual);
    }
    println!("criterion-2 style: worst residual {worst_res:.3e}, not converged {not_conv}");
}
