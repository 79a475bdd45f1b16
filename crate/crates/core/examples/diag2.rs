use fblsec::baselines::mrt_precoder;
use fblsec::channel::{generate_drop, ScenarioConfig};
use fblsec::forms::build_forms;
use fblsec::gpi::{gpi_solve, GpiObjective, GpiSettings};
use fblsec::math::FblParams;
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
    let mut rng = ChaCha8Rng::seed_from_u64(0x2222);
    let (n, k, m) = (4usize, 2usize, 2usize);
    for trial in 0..3 {
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
        let s = &run.step_norms;
        let tail: Vec<String> = s.iter().rev().take(6).map(|x| format!("{x:.3e}")).collect();
        let ratios: Vec<String> = (s.len().saturating_sub(6)..s.len().saturating_sub(1))
            .map(|i| format!("{:.4}", s[i+1]/s[i])).collect();
        println!("trial {trial}: conv={} iters={} res={:.3e}", run.converged, run.iterations, run.kkt_residual);
        println!("  step tail: {:?} ratios {:?}", tail, ratios);
        println!("  step[0..6]: {:?}", s.iter().take(6).map(|x| format!("{x:.3e}")).collect::<Vec<_>>());
        println!("  step[40..46]: {:?}", s.iter().skip(40).take(6).map(|x| format!("{x:.3e}")).collect::<Vec<_>>());
        println!("  step[200..206]: {:?}", s.iter().skip(200).take(6).map(|x| format!("{x:.3e}")).collect::<Vec<_>>());
    }
    // Realistic drop, tight mode
    for seed in [5u64, 6, 7] {
        let scenario = ScenarioConfig { antennas: 4, users: 2, eves: 2, seed, ..Default::default() };
        let channels = generate_drop(&scenario).unwrap();
        let params = params_at(20.0);
        let forms = build_forms(&channels, &params);
        let eps = vec![1e-6, 2e-6];
        let delta = EveUserMat::from_fn(2, 2, |mi, ki| 1e-6 * (1.0 + 0.3*(mi+ki) as f64));
        let init = mrt_precoder(&channels).unwrap();
        let run = gpi_solve(&forms, GpiObjective::Secrecy { eps: &eps, delta: &delta }, &params, &GpiSettings::tight(), &init).unwrap();
        let s = &run.step_norms;
        let ratios: Vec<String> = (s.len().saturating_sub(6)..s.len().saturating_sub(1))
            .map(|i| format!("{:.4}", s[i+1]/s[i])).collect();
        println!("drop seed {seed}: conv={} iters={} res={:.3e} tail ratios {:?}", run.converged, run.iterations, run.kkt_residual, ratios);
    }
}
