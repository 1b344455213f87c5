//! Sample specifications shipped with the crate.

/// Two bytes, the first of which must exceed 42.
pub const MESSAGE: &str = include_str!("../specs/message.3d");
/// [`MESSAGE`] with its fields renamed.
pub const MESSAGE_RENAMED: &str = include_str!("../specs/message_renamed.3d");
/// [`MESSAGE`] without its constraint.
pub const MESSAGE_UNCONSTRAINED: &str = include_str!("../specs/message_unconstrained.3d");
/// A TCP option: kind byte plus a kind-dependent payload.
pub const OPTION: &str = include_str!("../specs/option.3d");
/// [`OPTION`] without the maximum segment size case.
pub const OPTION_NARROW: &str = include_str!("../specs/option_narrow.3d");
/// A spec that rejects every input.
pub const ALWAYS_FAIL: &str = include_str!("../specs/always_fail.3d");
/// Enum, bitfields, parameterized types, arrays and consume-all.
pub const TLV: &str = include_str!("../specs/tlv.3d");
/// A UDP header whose length field covers the payload.
pub const UDP: &str = include_str!("../specs/udp.3d");
/// UDP without the length/payload relation.
pub const UDP_LOOSE: &str = include_str!("../specs/udp_loose.3d");
/// UDP that also requires a zero checksum.
pub const UDP_STRICT: &str = include_str!("../specs/udp_strict.3d");

/// Every sample with a short name.
pub const ALL: &[(&str, &str)] = &[
    ("message", MESSAGE),
    ("message_renamed", MESSAGE_RENAMED),
    ("message_unconstrained", MESSAGE_UNCONSTRAINED),
    ("option", OPTION),
    ("option_narrow", OPTION_NARROW),
    ("always_fail", ALWAYS_FAIL),
    ("tlv", TLV),
    ("udp", UDP),
    ("udp_loose", UDP_LOOSE),
    ("udp_strict", UDP_STRICT),
];

/// A struct of `n` one-byte fields, each with a constraint that always
/// holds. Used to exercise branch counting at scale.
pub fn constraint_chain(n: usize) -> String {
    let mut out = String::from("typedef struct _chain {\n");
    for i in 0..n {
        out.push_str(&format!("    UINT8 f{i} {{ f{i} >= 0 }};\n"));
    }
    out.push_str("} chain;\n");
    out
}
