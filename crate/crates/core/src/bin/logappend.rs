fn main() {
    bibifi::securelog_main("logappend", bibifi_securelog::Variant::Oracle, &bibifi::args())
}
