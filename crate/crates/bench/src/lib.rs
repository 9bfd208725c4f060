//! Shared inputs for the criterion benches.

/// Drug-like molecules of increasing size and ring count.
pub const SAMPLE_SMILES: &[&str] = &[
    "CCO",
    "CC(=O)Oc1ccccc1C(=O)O",
    "CN1CCC[C@H]1c1cccnc1",
    "CC(C)Cc1ccc(C(C)C(=O)O)cc1",
    "COc1ccc2[nH]cc(CCN(C)C)c2c1",
    "O=C(Nc1ccc(F)cc1)c1ccc(CN2CCN(C)CC2)cc1",
];
