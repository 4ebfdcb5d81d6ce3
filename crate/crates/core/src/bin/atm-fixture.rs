//! `atm-fixture <flavor> <bank|atm> args...`

fn main() {
    let args = bibifi::args();
    let flavor = args.first().and_then(|f| f.parse::<bibifi_atm::Flavor>().ok());
    let code = match (flavor, args.get(1).map(String::as_str)) {
        (Some(f), Some("bank")) => bibifi::bank_main(f, &args[2..]),
        (Some(f), Some("atm")) => bibifi::atm_main(f, &args[2..]),
        _ => {
            eprintln!("usage: atm-fixture <flavor> <bank|atm> args...");
            255
        }
    };
    std::process::exit(code)
}
