use bbprep::model::*;
use bbprep::optimize::*;

#[test]
fn table1_probe() {
    let g = 1.1;
    let table = [
        (2usize, -1.324301f64),
        (3, -1.334014),
        (4, -1.338055),
        (5, -1.340026),
        (6, -1.341092),
    ];
    let mut prev: Option<AngleSchedule> = None;
    for &(n, expect) in &table {
        let t0 = std::time::Instant::now();
        let obj = ObjectiveSpec::uniform_infinite(g, n, Engine::itebd_default()).unwrap();
        // warm start: previous optimum interpolated, else AP optimum
        let x0 = match &prev {
            Some(p) => interpolate_schedule(p, n).to_vec(),
            None => {
                let ap = optimize_ap(&Lattice::infinite_chain(g).unwrap(), n, Engine::itebd_default(), 1.2).unwrap();
                ap_schedule(ApConfig::new(n, ap.dt).unwrap()).to_vec()
            }
        };
        let cfg = OptimizerConfig { hops: 6, seed: 11, ..Default::default() };
        let r = optimize_bb(&obj, &cfg, &x0).unwrap();
        println!(
            "N={n}: E={:.7} table {expect} dev={:+.2e} evals={} wall={:.1}s",
            r.energy, r.energy - expect, r.evaluations, t0.elapsed().as_secs_f64()
        );
        prev = Some(AngleSchedule::from_vec(&r.x).unwrap());
    }
}
