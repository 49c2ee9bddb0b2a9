use frontspeed_core::{critical_speed, simulate, ProblemSpec, SimConfig};

#[test]
fn fisher_front_moves_at_two() {
    let spec = ProblemSpec::new(1.0, "0", "1", "u*(1-u)").unwrap();
    let coarse = simulate(&spec, &SimConfig::default()).unwrap();
    assert!((coarse.speed - 2.0).abs() < 0.1, "{}", coarse.speed);
    let fine = simulate(&spec, &SimConfig::default().refined()).unwrap();
    let change = (fine.speed - coarse.speed).abs() / coarse.speed;
    assert!(change < 0.02, "{} vs {}", coarse.speed, fine.speed);
    // Step data never travel slower than the minimal speed, up to the band.
    assert!(coarse.speed >= 0.95 * 2.0);
    println!("{} {} {}", coarse.speed, fine.speed, coarse.residual);
}

#[test]
fn drift_shifts_the_speed_like_the_critical_speed() {
    let spec = ProblemSpec::new(1.0, "0.5", "1", "u*(1-u)").unwrap();
    let measured = simulate(&spec, &SimConfig::default()).unwrap();
    let c_star = critical_speed(&spec, 1e-6).unwrap().c_star;
    assert!((c_star - 2.5).abs() < 1e-6);
    assert!(
        (measured.speed - c_star).abs() < 0.05 * c_star,
        "{}",
        measured.speed
    );
    println!("{}", measured.speed);
}

#[test]
fn snapshot_csv_has_absolute_positions() {
    let spec = ProblemSpec::new(1.0, "0", "1", "u*(1-u)").unwrap();
    let cfg = SimConfig {
        final_time: 100.0,
        ..SimConfig::default()
    };
    let m = simulate(&spec, &cfg).unwrap();
    assert!(m.offset > 0.0);
    let csv = m.snapshot_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x,v"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let (x, v) = l.split_once(',').unwrap();
            (x.parse().unwrap(), v.parse().unwrap())
        })
        .collect();
    let last = m.positions.last().unwrap().x;
    let i = rows.iter().rposition(|&(_, v)| v >= 0.5).unwrap();
    assert!(rows[i].0 <= last && last <= rows[i + 1].0);
}
