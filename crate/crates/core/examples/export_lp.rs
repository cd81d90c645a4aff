//! Prints the CPLEX LP model for one instance, duration preset and horizon.
//!
//! cargo run -p macc-core --example export_lp -- instances/e1.json termes 10

use macc_core::{instance::parse_instance, model::build_model, Catalog, DurationSpec};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    if args.len() != 4 {
        eprintln!("usage: export_lp <instance.json> <preset> <horizon>");
        std::process::exit(2);
    }
    let inst = parse_instance(&std::fs::read_to_string(&args[1]).expect("readable instance"))
        .expect("valid instance");
    let sd = DurationSpec::preset(&args[2])
        .expect("known preset")
        .scale()
        .expect("scalable durations");
    let horizon: u32 = args[3].parse().expect("integer horizon");
    let cat = Catalog::build(&inst, &sd, horizon).expect("horizon of at least 4");
    print!("{}", build_model(&inst, &cat).to_lp());
}
