// scratch: mask-accumulation variants (no indexed stores in the inner loop)
#[inline(always)]
fn mix64(mut x: u64) -> u64 {
    x ^= x >> 30;
    x = x.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^= x >> 31;
    x
}
#[inline(always)]
fn fmix32(mut x: u32) -> u32 {
    x ^= x >> 16;
    x = x.wrapping_mul(0x85eb_ca6b);
    x ^= x >> 13;
    x = x.wrapping_mul(0xc2b2_ae35);
    x ^= x >> 16;
    x
}

fn main() {
    let n: usize = 1500;
    let reps = 300;
    let thresh64 = (0.5 * 2f64.powi(64)) as u64;
    let thresh32 = (0.5 * 2f64.powi(32)) as u32;
    let states: Vec<u32> = (0..n).map(|i| (i % 2) as u32).collect();
    let groups = 6usize;
    let mut counts = vec![0u32; n * groups];

    // C2: full gather u64, mask accumulate
    let mut row_keys = vec![0u64; n];
    let t0 = std::time::Instant::now();
    for rep in 0..reps {
        counts.fill(0);
        let key = mix64(rep as u64 ^ 0x9999);
        for (i, rk) in row_keys.iter_mut().enumerate() {
            *rk = mix64(key ^ i as u64);
        }
        for alpha in 0..n {
            let mut total = 0u32;
            let mut ones = 0u32;
            for beta in 0..alpha {
                let e = (mix64(row_keys[beta] ^ alpha as u64) < thresh64) as u32;
                total += e;
                ones += e * states[beta];
            }
            let rk = row_keys[alpha];
            for beta in alpha + 1..n {
                let e = (mix64(rk ^ beta as u64) < thresh64) as u32;
                total += e;
                ones += e * states[beta];
            }
            counts[alpha * groups] += total - ones;
            counts[alpha * groups + 1] += ones;
        }
    }
    let per = t0.elapsed().as_secs_f64() * 1000.0 / reps as f64;
    println!("C2 gather u64 mask: {per:.3} ms/step (checksum {})", counts[37]);

    // D2: full gather u32, mask accumulate, incremental pair id
    let t0 = std::time::Instant::now();
    for rep in 0..reps {
        counts.fill(0);
        let key = fmix32(rep as u32 ^ 0x9999);
        for alpha in 0..n {
            let mut total = 0u32;
            let mut ones = 0u32;
            // beta < alpha: pair id = beta * n + alpha (stride n)
            let mut pair = alpha as u32;
            for beta in 0..alpha {
                let e = (fmix32(key ^ pair) < thresh32) as u32;
                total += e;
                ones += e * states[beta];
                pair += n as u32;
            }
            // beta > alpha: pair id = alpha * n + beta (stride 1)
            let base = (alpha * n) as u32;
            for beta in alpha + 1..n {
                let e = (fmix32(key ^ (base + beta as u32)) < thresh32) as u32;
                total += e;
                ones += e * states[beta];
            }
            counts[alpha * groups] += total - ones;
            counts[alpha * groups + 1] += ones;
        }
    }
    let per = t0.elapsed().as_secs_f64() * 1000.0 / reps as f64;
    println!("D2 gather u32 mask: {per:.3} ms/step (checksum {})", counts[37]);
}
