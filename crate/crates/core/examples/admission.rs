//! Service-profile resource needs, admission onto one modem, and a
//! compliance check against the requirement profiles.
//!
//!     cargo run --example admission

use linksim::profiles::{
    admit_channels, check_compliance, required_resources, ModemCapacity, RequirementProfile, RequirementProfileId,
    ServiceProfile,
};

fn main() -> linksim::Result<()> {
    let sps = [ServiceProfile::sp1(), ServiceProfile::sp2(), ServiceProfile::sp3()];
    print!("{:>8}", "C Mbit/s");
    for sp in &sps {
        print!("{:>8}", sp.id.to_string());
    }
    println!();
    for c in [200.0, 400.0, 800.0, 1000.0] {
        let cap = ModemCapacity::new(c)?;
        print!("{c:>8}");
        for sp in &sps {
            print!("{:>8.3}", required_resources(sp, cap)?);
        }
        println!();
    }

    let cap = ModemCapacity::new(1000.0)?;
    for set in [
        vec![(ServiceProfile::sp1(), 2), (ServiceProfile::sp2(), 3)],
        vec![(ServiceProfile::sp2(), 5)],
        vec![(ServiceProfile::sp3(), 1), (ServiceProfile::sp1(), 1)],
    ] {
        let a = admit_channels(&set, cap)?;
        let names: Vec<String> = set.iter().map(|(sp, n)| format!("{n}x{}", sp.id)).collect();
        println!(
            "{:<16} load {:.3} -> {}",
            names.join(" + "),
            a.load,
            if a.accepted { "admitted" } else { "rejected" }
        );
    }

    for id in [
        RequirementProfileId::Rp1,
        RequirementProfileId::Rp2,
        RequirementProfileId::Rp3,
        RequirementProfileId::Rp4,
    ] {
        let rp = RequirementProfile::builtin(id);
        let report = check_compliance(&rp, 10e-6, 1e-7, 50.0)?;
        println!("{id:?}: 10 us, PER 1e-7, 50 cm -> {report:?}");
    }
    Ok(())
}
