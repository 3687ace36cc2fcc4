use beamtrack::array::ArrayGeometry;
use beamtrack::codebook::{design_wide_beam, EvolutionParams, FitnessParams};

fn main() {
    let geom = ArrayGeometry::half_wavelength(64).unwrap();
    let params = FitnessParams {
        beta1: 2.0,
        beta2: 2.0,
        beamwidth: 15.0_f64.to_radians(),
        target_center: 0.0,
        grid_step: 0.25_f64.to_radians(),
    };
    let evo = EvolutionParams { population_size: 100, stagnation_limit: 200, eta_max: 1e5, rng_seed: 1 };
    let t0 = std::time::Instant::now();
    let d = design_wide_beam(&geom, &params, &evo).unwrap();
    let dt = t0.elapsed();
    println!("iterations: {}", d.iterations);
    println!("time: {:.2} s", dt.as_secs_f64());
    println!("final fitness: {:.6}", d.fitness_trace.last().unwrap());
    println!("terms: ripple={:.4} leakage={:.4} in_band_power={:.4}", d.terms.ripple, d.terms.leakage, d.terms.in_band_power);
}
