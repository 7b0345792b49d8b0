use std::path::Path;

use affine_ipc::geometry::Vec3;
use affine_ipc::par::Execution;
use affine_ipc::scene::{instantiate, PropConfig, SceneConfig, ShapeConfig};
use affine_ipc::solver::World;
use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

/// A row of fine spheres resting in near-contact on a slab and on each other.
fn resting_spheres(exec: Execution) -> World {
    let radius = 0.05;
    let mut props =
        vec![PropConfig::new("slab", ShapeConfig::Box { size: Vec3::new(1.0, 0.4, 0.05) }, Vec3::new(0.0, 0.0, -0.025)).fixed()];
    for i in 0..6 {
        let x = (i as f64 - 2.5) * (2.0 * radius + 4e-4);
        props.push(PropConfig::new(
            format!("sphere{i}"),
            ShapeConfig::Icosphere { radius, subdivisions: 3 },
            Vec3::new(x, 0.0, radius + 4e-4),
        ));
    }
    let mut config = SceneConfig { props, ..Default::default() };
    config.params.execution = exec;
    instantiate(config, Path::new(".")).expect("bench scene").world
}

fn step(c: &mut Criterion) {
    let mut group = c.benchmark_group("contact_step");
    group.sample_size(10);
    for (name, exec) in [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)] {
        let world = resting_spheres(exec);
        group.bench_function(name, |b| {
            b.iter_batched(|| world.clone(), |mut w| w.step(&[]).expect("step"), BatchSize::LargeInput)
        });
    }
    group.finish();
}

criterion_group!(benches, step);
criterion_main!(benches);
