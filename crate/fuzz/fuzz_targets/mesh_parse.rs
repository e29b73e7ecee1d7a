#![no_main]

use libfuzzer_sys::fuzz_target;
use viscoduct::{DiscreteOperators, Triangulation};

fuzz_target!(|text: &str| {
    let Ok(mesh) = Triangulation::parse(text) else {
        return;
    };
    // accepted meshes must survive a round trip unchanged
    let again = Triangulation::parse(&mesh.to_text()).expect("serialized mesh parses");
    assert_eq!(again.nodes(), mesh.nodes());
    assert_eq!(again.triangles(), mesh.triangles());
    if mesh.n_nodes() <= 2000 {
        let _ = DiscreteOperators::assemble(&mesh, 1.0);
    }
});
