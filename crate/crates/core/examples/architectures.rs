//! Neuron and parameter counts of the reference gesture and animal models.

use snn_hdc::snn::{dvs_gesture, sl_animals, Architecture, ModelVariant};

fn row(name: &str, a: &Architecture) {
    let shapes: Vec<String> = a
        .population_shapes()
        .iter()
        .map(ToString::to_string)
        .collect();
    println!(
        "{name:<22} {:>6} neurons {:>8} parameters   [{}]  populations {}",
        a.count_neurons(),
        a.count_parameters(),
        a.notation(),
        shapes.join(", ")
    );
}

fn main() {
    let d = 1024;
    for (set, build) in [
        (
            "gesture",
            dvs_gesture as fn(ModelVariant, usize) -> Architecture,
        ),
        ("animals", sl_animals),
    ] {
        row(&format!("{set} hdc"), &build(ModelVariant::Hdc, d));
        row(
            &format!("{set} same depth"),
            &build(ModelVariant::SameDepth, d),
        );
        row(&format!("{set} deeper"), &build(ModelVariant::Deeper, d));
    }
}
