//! Places three receivers at the reference gains and prints their geometry.
//!
//! `cargo run --example channel_gains`

use vlc_noma::channel::{
    anchor_positions, channel_gain, fov_radius, lumped_constant, simplified_gain, LinkGeometry,
    Point3, ReceiverFrontEnd, DEFAULT_TABLE_DEPTH,
};
use vlc_noma::experiment::TABLE_GAINS;

fn main() -> vlc_noma::Result<()> {
    let fe = ReceiverFrontEnd::nominal();
    let led = Point3::new(2.5, 2.5, 3.0);
    let depth = DEFAULT_TABLE_DEPTH;
    let order = fe.lambertian_order()?;
    let lumped = lumped_constant(&fe, depth)?;

    println!("Lambertian order      {order:.10}");
    println!("lumped constant       {lumped:.6e}");
    println!(
        "FOV footprint radius  {:.3} m at depth {depth} m",
        fov_radius(&fe, depth)
    );
    println!();
    println!(
        "{:>10} {:>24} {:>8} {:>12} {:>12}",
        "target", "position", "r [m]", "gain", "simplified"
    );
    for (target, pd) in TABLE_GAINS
        .iter()
        .zip(anchor_positions(&TABLE_GAINS, &fe, led, depth)?)
    {
        let geo = LinkGeometry::between(led, pd)?;
        let h = channel_gain(&geo, &fe)?;
        let approx = simplified_gain(led.distance(&pd), lumped, order)?;
        println!(
            "{target:>10.3e} ({:>6.3}, {:>6.3}, {:>4.2}) {:>8.3} {h:>12.5e} {approx:>12.5e}",
            pd.x,
            pd.y,
            pd.z,
            led.horizontal_distance(&pd),
        );
    }
    Ok(())
}
