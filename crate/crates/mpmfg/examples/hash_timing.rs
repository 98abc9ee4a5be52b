// scratch benchmark for the adjacency inner loop (not part of the library)
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
    let reps = 200;
    let thresh64 = (0.5 * 2f64.powi(64)) as u64;
    let thresh32 = (0.5 * 2f64.powi(32)) as u32;
    let states: Vec<u16> = (0..n).map(|i| (i % 2) as u16).collect();
    let groups = 6usize;

    // B: triangle, register accumulators alpha-side, scatter beta-side
    let mut counts = vec![0u32; n * groups];
    let t0 = std::time::Instant::now();
    for rep in 0..reps {
        counts.fill(0);
        let key = mix64(rep as u64 ^ 0x1234_5678);
        for alpha in 0..n as u32 {
            let mut acc = [0u32; 2];
            let ga = (states[alpha as usize] % 2) as usize;
            for beta in alpha + 1..n as u32 {
                let h = mix64(key ^ (((alpha as u64) << 32) | beta as u64));
                let e = (h < thresh64) as u32;
                acc[states[beta as usize] as usize] += e;
                counts[beta as usize * groups + ga] += e;
            }
            counts[alpha as usize * groups] += acc[0];
            counts[alpha as usize * groups + 1] += acc[1];
        }
    }
    let per = t0.elapsed().as_secs_f64() * 1000.0 / reps as f64;
    println!("B triangle+acc   : {per:.3} ms/step  (checksum {})", counts[37]);

    // C: full gather, u64 hash, row keys
    let mut row_keys = vec![0u64; n];
    let t0 = std::time::Instant::now();
    for rep in 0..reps {
        counts.fill(0);
        let key = mix64(rep as u64 ^ 0x1234_5678);
        for (i, rk) in row_keys.iter_mut().enumerate() {
            *rk = mix64(key ^ i as u64);
        }
        for alpha in 0..n {
            let mut acc = [0u32; 2];
            // beta < alpha: pair (beta, alpha)
            for beta in 0..alpha {
                let h = mix64(row_keys[beta] ^ alpha as u64);
                let e = (h < thresh64) as u32;
                acc[states[beta] as usize] += e;
            }
            // beta >= alpha
            let rk = row_keys[alpha];
            for beta in alpha + 1..n {
                let h = mix64(rk ^ beta as u64);
                let e = (h < thresh64) as u32;
                acc[states[beta] as usize] += e;
            }
            counts[alpha * groups] += acc[0];
            counts[alpha * groups + 1] += acc[1];
        }
    }
    let per = t0.elapsed().as_secs_f64() * 1000.0 / reps as f64;
    println!("C gather u64     : {per:.3} ms/step  (checksum {})", counts[37]);

    // D: full gather, u32 hash
    let t0 = std::time::Instant::now();
    for rep in 0..reps {
        counts.fill(0);
        let key = fmix32(rep as u32 ^ 0x1234_5678);
        for alpha in 0..n {
            let mut acc = [0u32; 2];
            for beta in 0..alpha {
                let pair = (beta * n + alpha) as u32;
                let e = (fmix32(key ^ pair) < thresh32) as u32;
                acc[states[beta] as usize] += e;
            }
            for beta in alpha + 1..n {
                let pair = (alpha * n + beta) as u32;
                let e = (fmix32(key ^ pair) < thresh32) as u32;
                acc[states[beta] as usize] += e;
            }
            counts[alpha * groups] += acc[0];
            counts[alpha * groups + 1] += acc[1];
        }
    }
    let per = t0.elapsed().as_secs_f64() * 1000.0 / reps as f64;
    println!("D gather u32     : {per:.3} ms/step  (checksum {})", counts[37]);
}
