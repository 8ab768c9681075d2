use knowbal::ontic::SystemShape;
use knowbal::transforms::*;
use knowbal::validity::Catalog;

fn main() {
    let sh2 = SystemShape::new(2).unwrap();
    let cat2 = Catalog::enumerate(sh2, true).unwrap();
    let t0 = std::time::Instant::now();
    let full = enumerate_allowed(sh2, &cat2).unwrap();
    println!("backtracking order: {} ({:?})", full.order(), t0.elapsed());

    // generators: locals, swap, cnot
    let s4: Vec<Permutation> = ["(12)(3)(4)", "(1234)"].iter().map(|c| Permutation::from_cycles(c).unwrap()).collect();
    let id1 = Permutation::identity(SystemShape::new(1).unwrap());
    let mut gens = vec![];
    for g in &s4 {
        gens.push(Permutation::embed_local(sh2, &[g.clone(), id1.clone()]).unwrap());
        gens.push(Permutation::embed_local(sh2, &[id1.clone(), g.clone()]).unwrap());
    }
    gens.push(Permutation::system_reorder(sh2, &[2,1]).unwrap());
    gens.push(cnot_analogue());
    let t0 = std::time::Instant::now();
    let gen_group = closure(&gens, &cat2).unwrap();
    println!("closure order: {} ({:?})", gen_group.order(), t0.elapsed());
    println!("cnot allowed: {}", is_allowed(&cnot_analogue(), &cat2).unwrap());

    // the (1,1)<->(1,2) transposition must be excluded
    let mut img: Vec<u16> = (0..16).collect();
    img.swap(0, 1);
    let t = Permutation::from_image(sh2, img).unwrap();
    println!("transposition allowed: {}", is_allowed(&t, &cat2).unwrap());
    println!("group contains transposition: {}", full.contains(&t));
}
