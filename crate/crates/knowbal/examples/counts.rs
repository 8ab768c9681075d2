use knowbal::ontic::SystemShape;
use knowbal::validity::Catalog;

fn main() {
    let t0 = std::time::Instant::now();
    let c2 = Catalog::enumerate(SystemShape::new(2).unwrap(), true).unwrap();
    println!("N=2 sizes: {:?}  ({:?})", c2.sizes().collect::<Vec<_>>(), t0.elapsed());
    let t0 = std::time::Instant::now();
    let c3 = Catalog::enumerate(SystemShape::new(3).unwrap(), false).unwrap();
    println!("N=3 pure-only sizes: {:?}  ({:?})", c3.sizes().collect::<Vec<_>>(), t0.elapsed());
    let t0 = std::time::Instant::now();
    let c3f = Catalog::enumerate(SystemShape::new(3).unwrap(), true).unwrap();
    println!("N=3 full sizes: {:?}  ({:?})", c3f.sizes().collect::<Vec<_>>(), t0.elapsed());
}
