use ltlab::*;
use ltlab::series::*;
use ltlab::lubin_tate::FormalGroup;
use ltlab::coleman::ColemanContext;

fn main() {
    let s = BaseRingSpec::new(3, 1, 1, None, None, 14).unwrap();
    let fr = IntSeries::from_i64_coeffs(&s, s.max_pi_prec_budget(), 0, &[0, 3, 0, 1]);
    let g = FormalGroup::build(&s, &fr, 10, 6).unwrap();
    // manual gate replication with a context built without the gate:
    // rebuild pieces via public API
    let ctx = match ColemanContext::build_unchecked_for_debug(&g, 4, 14) {
        Ok(c) => c,
        Err(e) => { println!("table build err: {e}"); return; }
    };
    let f2 = IntSeries::from_i64_coeffs(&s, 4, 0, &[1, 0, 1, 2])
        .mul_pi_pow(1).with_prec(4)
        .add(&IntSeries::one(&s, 4))
        .truncate_high(9);
    println!("f2 = {:?}", f2);
    let ph = ctx.phi(&f2).unwrap();
    println!("phi(f2) window [{}, {})", ph.z_low, ph.z_high);
    let n2 = ctx.norm(&ph).unwrap();
    println!("norm window [{}, {}) = {:?}", n2.z_low, n2.z_high, n2);
    let f2q = f2.pow(3);
    println!("f2^q = {:?}", f2q);
}
