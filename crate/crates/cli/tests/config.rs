use prinn::{Experiment, ExperimentConfig};
use prinn_core::losses::{Preset, Uncertain};

#[test]
fn minimal_config_takes_registry_defaults() {
    for e in Experiment::ALL {
        let cfg = ExperimentConfig::parse(&format!("experiment = {e}\n")).unwrap();
        let d = e.defaults();
        assert_eq!(cfg.experiment, e);
        assert_eq!(cfg.preset, d.preset);
        assert_eq!(cfg.output_dir, e.name());
        assert_eq!(cfg.oracle.check_points, 301);
        if e == Experiment::FinnController {
            assert!(cfg.problem.is_none() && cfg.controller.is_some());
        } else {
            assert_eq!(cfg.hidden, d.hidden);
            assert_eq!(cfg.train.epochs, d.epochs);
            assert_eq!((cfg.train.collocation.lo, cfg.train.collocation.hi), d.domain);
        }
    }
}

#[test]
fn reversed_triple_is_rejected_with_its_line() {
    let text = "experiment = fcinn-decay\n\n[problem]\nrate = fuzzy(0.05, 0.65, 0.1)\n";
    let err = ExperimentConfig::parse(text).unwrap_err().to_string();
    assert!(err.contains("line 4"), "{err}");
    assert!(err.contains("not nondecreasing"), "{err}");
}

#[test]
fn duplicate_and_unknown_keys_are_all_reported() {
    let text = "experiment = pinn-decay\n[train]\nepochs = 10\nepochs = 20\nlearnin_rate = 1\n";
    let err = ExperimentConfig::parse(text).unwrap_err().to_string();
    assert!(err.contains("duplicate key `train.epochs` (lines 3 and 4)"), "{err}");
    assert!(err.contains("learnin_rate"), "{err}");
}

#[test]
fn preset_must_fit_the_experiment() {
    let err = ExperimentConfig::parse("experiment = pinn-decay\npreset = sureness\n").unwrap_err().to_string();
    assert!(err.contains("does not fit"), "{err}");
    let cfg = ExperimentConfig::parse("experiment = sinnet-oscillator\npreset = sureness-pointwise\n").unwrap();
    assert_eq!(cfg.preset, Some(Preset::SurenessPointwise));
}

#[test]
fn overrides_replace_and_add_keys() {
    let text = "experiment = fcinn-decay\n[train]\nepochs = 10\n";
    let o = |k: &str, v: &str| (k.to_string(), v.to_string());
    let cfg = ExperimentConfig::parse_with_overrides(text, &[o("train.epochs", "7"), o("problem.rate", "fuzzy(-0.4, -0.3, -0.2)")]).unwrap();
    assert_eq!(cfg.train.epochs, 7);
    let ode = cfg.problem.unwrap().ode.unwrap();
    assert!(matches!(ode, prinn_core::losses::ImpreciseOde::ExpDecay { rate: Uncertain::Fuzzy(n), .. } if n.modal() == -0.3));
    assert!(ExperimentConfig::parse_with_overrides(text, &[o("nosuch.key", "1")]).is_err());
    let err = ExperimentConfig::parse_with_overrides(text, &[o("problem.rate", "-0.3")]).unwrap_err().to_string();
    assert!(err.contains("fuzzy"), "{err}");
}

#[test]
fn output_dir_stays_under_the_root() {
    for bad in ["../up", "/abs", ""] {
        assert!(ExperimentConfig::parse(&format!("experiment = pinn-decay\n[output]\ndir = {bad}\n")).is_err(), "{bad}");
    }
}

#[test]
fn shipped_configs_parse_and_match_the_defaults() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for e in Experiment::ALL {
        let text = std::fs::read_to_string(dir.join(format!("{e}.conf"))).unwrap();
        let shipped = ExperimentConfig::parse(&text).unwrap_or_else(|err| panic!("{e}: {err}"));
        let minimal = ExperimentConfig::parse(&format!("experiment = {e}\n")).unwrap();
        assert_eq!(format!("{shipped:?}"), format!("{minimal:?}"), "{e}.conf drifted from the defaults");
    }
}
