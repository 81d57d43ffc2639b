//! Print the sparsity statistics of the stiffness matrices per level,
//! without assembling anything: the generic nonzero count (entries not
//! forced to zero by orthonormality and support geometry) and the raw
//! support-overlap count, for both bilinear forms.
//!
//! Usage: `nnz_table <dim> <degree> <max_level>`

use sgdg::assembly::{generic_nnz, structural_nnz, Method};
use sgdg::space::DofMap;

fn main() {
    let mut args = std::env::args().skip(1);
    let usage = "usage: nnz_table <dim> <degree> <max_level>";
    let d: usize = args.next().expect(usage).parse().expect(usage);
    let k: usize = args.next().expect(usage).parse().expect(usage);
    let nmax: usize = args.next().expect(usage).parse().expect(usage);
    println!("d={d} k={k}");
    println!(
        "{:>2} {:>9} {:>13} {:>8} {:>13} {:>8} {:>13} {:>13}",
        "N", "DOF", "NNZ(mod)", "O_s", "NNZ(orig)", "O_s", "overlap(mod)", "overlap(orig)"
    );
    for n in 0..=nmax {
        let map = match DofMap::build(d, k, n) {
            Ok(m) => m,
            Err(e) => {
                eprintln!("N={n}: {e}");
                break;
            }
        };
        let gm = generic_nnz(&map, Method::Modified);
        let go = generic_nnz(&map, Method::Original);
        let sm = structural_nnz(&map, Method::Modified);
        let so = structural_nnz(&map, Method::Original);
        let os = |nnz: usize| (nnz as f64).ln() / (map.len() as f64).ln();
        println!(
            "{:>2} {:>9} {:>13} {:>8.4} {:>13} {:>8.4} {:>13} {:>13}",
            n,
            map.len(),
            gm,
            os(gm),
            go,
            os(go),
            sm,
            so
        );
    }
}
