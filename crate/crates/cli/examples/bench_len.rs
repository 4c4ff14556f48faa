use missdig::rat::Rat;
use missdig::stream::*;
use std::time::Instant;

fn main() {
    let big_q = 16384u64;
    let eta = Rat::new(1, big_q as i128);
    let fams_raw: Vec<Family> =
        (big_q..2 * big_q).map(|q| Family { q, eta, theta: Rat::ZERO }).collect();
    let fams = prepare(&fams_raw).unwrap();
    for n_chunks in [4026u64, 1024, 256, 64] {
        let step = (n_chunks / 16).max(1) as usize;
        let t0 = Instant::now();
        let mut total = 0usize;
        let mut sampled = 0u64;
        for i in (0..n_chunks).step_by(step) {
            let (a, b) = len_chunk_window(&Rat::ZERO, &Rat::ONE, i, n_chunks);
            let ivs = sorted_window(&fams, &a, &b);
            total += ivs.len();
            sampled += 1;
        }
        let est_full = t0.elapsed().as_secs_f64() * (n_chunks as f64 / sampled as f64);
        println!(
            "chunks={n_chunks}: sampled {sampled}, {:.0} ns/iv, est full gen+sort {:.1}s",
            t0.elapsed().as_nanos() as f64 / total as f64,
            est_full
        );
    }
}
