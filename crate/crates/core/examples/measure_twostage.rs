// quick probe: region connectivity + two-stage failure rate
use trajlab_core::*;
use trajlab_core::generator::ModelDims;
use trajlab_core::regions::*;
use trajlab_core::searchgen::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn region_components(net: &RoadNetwork, p: &Partition) -> Vec<usize> {
    let n = net.len();
    let mut comp = vec![usize::MAX; n];
    let mut counts = vec![0usize; p.k()];
    let mut next = 0;
    for start in 0..n {
        if comp[start] != usize::MAX { continue; }
        let r = p.region_of_index(start);
        counts[r as usize] += 1;
        comp[start] = next;
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            let mut nbrs: Vec<usize> = net.successor_indices(v).to_vec();
            nbrs.extend_from_slice(net.predecessor_indices(v));
            for u in nbrs {
                if comp[u] == usize::MAX && p.region_of_index(u) == r {
                    comp[u] = next;
                    stack.push(u);
                }
            }
        }
        next += 1;
    }
    counts
}

fn main() {
    for (rows, k) in [(10usize, 6usize), (20, 8), (20, 16)] {
        let net = synth_grid(rows, rows, 0.0, 13).unwrap();
        let p = partition_network(&net, k, 0.1, 5).unwrap();
        let comps = region_components(&net, &p);
        println!("{rows}x{rows} k={k}: components per region {:?}", comps);
        let b = boundary_sets(&net, &p, &[]).unwrap();
        let rn = region_network(&net, &p, &b).unwrap();
        let road = generator::PolicyModel::new(&net, ModelDims::tiny(), 1).unwrap();
        let reg = generator::PolicyModel::new(&rn, ModelDims::tiny(), 2).unwrap();
        let ids: Vec<u64> = net.segments().iter().map(|s| s.id).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let (mut ok, mut fail) = (0, 0);
        let mut failed_legs: Vec<String> = vec![];
        for _ in 0..200 {
            let a = ids[rng.gen_range(0..ids.len())];
            let d = ids[rng.gen_range(0..ids.len())];
            match two_stage_generate(&road, &reg, &net, &rn, &p, &b, a, d, 345600.0, &TwoStageBudgets::default(), &mut rng) {
                Ok(_) => ok += 1,
                Err(e) => { fail += 1; if failed_legs.len() < 3 { failed_legs.push(format!("{e}")); } }
            }
        }
        println!("   ok={ok} fail={fail}  first failures: {failed_legs:?}");
    }
}
