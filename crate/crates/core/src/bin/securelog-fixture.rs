//! `securelog-fixture <variant> <logappend|logread> args...`

fn main() {
    let args = bibifi::args();
    let (Some(variant), Some(program)) = (args.first().and_then(|v| bibifi::log_variant(v)), args.get(1)) else {
        eprintln!("usage: securelog-fixture <variant> <logappend|logread> args...");
        std::process::exit(255)
    };
    bibifi::securelog_main(program, variant, &args[2..])
}
