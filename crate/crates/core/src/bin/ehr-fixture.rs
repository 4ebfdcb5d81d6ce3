//! `ehr-fixture <variant> <port> [admin-password]`

fn main() {
    let args = bibifi::args();
    let Some(variant) = args.first().and_then(|v| v.parse::<bibifi_ehr::Variant>().ok()) else {
        eprintln!("usage: ehr-fixture <variant> <port> [admin-password]");
        std::process::exit(255)
    };
    std::process::exit(bibifi::server_main(variant, &args[1..]))
}
