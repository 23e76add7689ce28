use std::path::Path;

use snn_hdc::harness::{DataSource, ExperimentConfig};

#[test]
fn shipped_configs_parse_and_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for name in ["synthetic.json", "dvs_gesture.json", "sl_animals.json"] {
        let cfg = ExperimentConfig::load(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
        cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        if let DataSource::Evs1 { manifest } = &cfg.data {
            assert!(manifest.is_absolute(), "{name}: manifest path not resolved");
        }
    }
}
