use dilute_spectra::model::{EntryDistribution, ModelParams, SparseSample};
use dilute_spectra::spectral::largest_sv_lanczos;

fn main() {
    let u = [1.0, 2.0, 3.0];
    let v = [2.0, 1.0];
    let pr = ModelParams::new(3, 2, 1.0, EntryDistribution::gaussian(4.0).unwrap(), 1.0).unwrap();
    let rows: Vec<Vec<(u32, f64)>> = u
        .iter()
        .map(|ui| v.iter().enumerate().map(|(j, vj)| (j as u32, ui * vj)).collect())
        .collect();
    let s = SparseSample::from_rows(&pr, 0, rows).unwrap();
    let summary = largest_sv_lanczos(&s, 1e-10, 50).unwrap();
    println!("s1={} iters={} resid={:e} conv={}", summary.s1, summary.iterations, summary.residual, summary.converged);
    println!("want {}", (14.0f64).sqrt() * 5.0f64.sqrt());
}
