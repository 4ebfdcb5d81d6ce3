fn main() {
    std::process::exit(bibifi::server_main(bibifi_ehr::Variant::Oracle, &bibifi::args()))
}
