use knowbal::measurements::*;
use knowbal::ontic::SystemShape;
use knowbal::transforms::Permutation;
use knowbal::validity::Catalog;

fn main() {
    let sh2 = SystemShape::new(2).unwrap();
    let c2 = Catalog::enumerate(sh2, true).unwrap();
    let t0 = std::time::Instant::now();
    let all = enumerate_maximal(sh2, &c2).unwrap();
    println!("maximal N=2 measurements: {} ({:?})", all.len(), t0.elapsed());
    let joint = all.iter().filter(|m| m.outcomes().iter().all(|o| {
        // correlated = both marginals fully mixed
        o.marginal(&[1]).unwrap().size() == 4 && o.marginal(&[2]).unwrap().size() == 4
    })).count();
    println!("all-correlated measurements: {joint}");

    // the quintuple: z*z, x*x, y*y products + two 3-cycle cosets
    let c1 = Catalog::enumerate(SystemShape::new(1).unwrap(), true).unwrap();
    let parts = canonical_partitions(&c1);
    let mk_prod = |ax: &Measurement| {
        let os: Vec<_> = ax.outcomes().iter().flat_map(|a| ax.outcomes().iter().map(move |b| a.conjoin(b).unwrap())).collect();
        Measurement::new(os, &c2).unwrap()
    };
    let coset = |base: &str| -> Vec<Permutation> {
        let b = Permutation::from_cycles(base).unwrap();
        bell_permutations().iter().map(|v| b.compose(v).unwrap()).collect()
    };
    let j2 = relation_measurement(&coset("(123)(4)"), &c2).unwrap();
    let j3 = relation_measurement(&coset("(132)(4)"), &c2).unwrap();
    let quint = [mk_prod(&parts[0]), mk_prod(&parts[1]), mk_prod(&parts[2]), j2, j3];
    let mut all_mu = true;
    for i in 0..5 { for j in (i+1)..5 {
        if !are_mutually_unbiased(&quint[i], &quint[j]).unwrap() { all_mu = false; println!("pair {i},{j} NOT MU"); }
    }}
    println!("quintuple pairwise MU: {all_mu}");

    let t0 = std::time::Instant::now();
    let five = find_mup_sets(sh2, 5, &c2, true).unwrap();
    println!("5-MUP sets: {} ({:?})", five.len(), t0.elapsed());
    let t0 = std::time::Instant::now();
    let six = find_mup_sets(sh2, 6, &c2, true).unwrap();
    println!("6-MUP sets: {} ({:?})", six.len(), t0.elapsed());
}
