use peloton::{run, write_report, OutputFormat, ReportContext, ReportSelection, RunConfig};
use peloton_core::{mass_start, random_instance, MassStartConfig, Mode, Params};

#[test]
fn boston_scale_race_completes() {
    let cfg = MassStartConfig {
        athletes: 32_000,
        distances_m: vec![5000, 10000, 15000, 20000, 21098, 25000, 30000, 35000, 40000, 41000, 42000, 42195],
        ..MassStartConfig::default()
    };
    let events = mass_start(&cfg);
    assert_eq!(events.len(), 384_000);
    let r = run(&RunConfig { params: Params { epsilon: 1000, ..Params::default() }, ..RunConfig::default() }, &events).unwrap();
    assert_eq!(r.cp_stats.len(), 12);
    assert!(r.cp_stats.iter().all(|s| s.crossings == 32_000));
    assert!(r.timings.throughput(r.events) > 10_000.0);
    // the crowd thins out along the course
    assert!(r.cp_stats[0].largest_group > r.cp_stats[11].largest_group);
}

#[test]
fn record_reports_are_deterministic() {
    let sel: ReportSelection = "summary,patterns,longterm,labels,status,anomalies".parse().unwrap();
    for seed in 0..20 {
        let inst = random_instance(seed);
        let render = |mode| {
            let r = run(&RunConfig { params: inst.params, mode, control_points: None }, &inst.events).unwrap();
            let mut buf = Vec::new();
            write_report(&mut buf, &r, &ReportContext { pace_jump: 1.5, ..Default::default() }, sel, OutputFormat::Records).unwrap();
            String::from_utf8(buf).unwrap()
        };
        let first = render(Mode::Finalized);
        assert_eq!(first, render(Mode::Finalized), "seed {seed}");
        assert_eq!(first, render(Mode::Online).replace("\"mode\":\"online\"", "\"mode\":\"finalized\""), "seed {seed}");
    }
}
