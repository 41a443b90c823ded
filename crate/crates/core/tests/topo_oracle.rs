use merlean::statement::{topological_order, Statement, StatementError, StatementKind, StatementSet};
use proptest::prelude::*;

fn set_from(deps: &[Vec<usize>]) -> StatementSet {
    let stmts = deps
        .iter()
        .enumerate()
        .map(|(i, ds)| {
            let names: Vec<String> = ds.iter().map(|d| format!("Def_{}", d + 1)).collect();
            let refs: Vec<&str> = names.iter().map(String::as_str).collect();
            Statement::new(&format!("Def_{}", i + 1), StatementKind::Definition, format!("s{i}"), &refs).unwrap()
        })
        .collect();
    StatementSet::new("fp", stmts)
}

fn valid(order: &[usize], deps: &[Vec<usize>]) -> bool {
    let mut pos = vec![usize::MAX; deps.len()];
    for (p, &v) in order.iter().enumerate() {
        pos[v] = p;
    }
    order.len() == deps.len() && deps.iter().enumerate().all(|(v, ds)| ds.iter().all(|&d| pos[d] < pos[v]))
}

/// Lexicographically least valid permutation, by enumerating permutations
/// in lexicographic order and pruning prefixes that already break an edge.
fn brute_force(deps: &[Vec<usize>]) -> Option<Vec<usize>> {
    fn go(deps: &[Vec<usize>], prefix: &mut Vec<usize>, used: &mut Vec<bool>) -> bool {
        if prefix.len() == deps.len() {
            return true;
        }
        for v in 0..deps.len() {
            if used[v] || !deps[v].iter().all(|&d| used[d]) {
                continue;
            }
            used[v] = true;
            prefix.push(v);
            if go(deps, prefix, used) {
                return true;
            }
            prefix.pop();
            used[v] = false;
        }
        false
    }
    let mut prefix = Vec::new();
    go(deps, &mut prefix, &mut vec![false; deps.len()]).then_some(prefix)
}

/// Every permutation of `0..n`, for small `n`.
fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in all_permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// Random DAG: a hidden ranking decides the direction of every edge.
fn dag() -> impl Strategy<Value = Vec<Vec<usize>>> {
    (1usize..=10)
        .prop_flat_map(|n| (Just(n), Just((0..n).collect::<Vec<_>>()).prop_shuffle(), proptest::collection::vec(any::<bool>(), n * n)))
        .prop_map(|(n, rank, edges)| {
            let mut deps = vec![Vec::new(); n];
            for a in 0..n {
                for b in 0..n {
                    if rank[a] < rank[b] && edges[a * n + b] && (a + b) % 3 != 0 {
                        deps[b].push(a);
                    }
                }
            }
            deps
        })
}

fn ids(order: &[usize]) -> Vec<String> {
    order.iter().map(|i| format!("Def_{}", i + 1)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]

    #[test]
    fn agrees_with_permutation_oracle(deps in dag()) {
        let got: Vec<String> = topological_order(&set_from(&deps)).unwrap().iter().map(|i| i.to_string()).collect();
        let expected = brute_force(&deps).expect("a DAG has an order");
        prop_assert_eq!(&got, &ids(&expected));
        if deps.len() <= 7 {
            let least = all_permutations(deps.len()).into_iter().filter(|p| valid(p, &deps)).min().unwrap();
            prop_assert_eq!(&got, &ids(&least));
        }
    }

    #[test]
    fn cycles_are_rejected_with_a_witness(deps in dag(), from in 0usize..10, to in 0usize..10) {
        let n = deps.len();
        prop_assume!(n >= 2);
        let from = from % n;
        let to = (from + 1 + to % (n - 1)) % n;
        let mut cyclic = deps.clone();
        // require `from` before `to` and `to` before `from`
        for (a, b) in [(to, from), (from, to)] {
            if !cyclic[a].contains(&b) {
                cyclic[a].push(b);
            }
        }
        match topological_order(&set_from(&cyclic)) {
            Err(StatementError::Cycle(w)) => {
                prop_assert!(!w.is_empty());
                let idx: Vec<usize> = w.iter().map(|s| s[4..].parse::<usize>().unwrap() - 1).collect();
                for k in 0..idx.len() {
                    let (a, b) = (idx[k], idx[(k + 1) % idx.len()]);
                    prop_assert!(cyclic[a].contains(&b), "witness edge {} -> {} missing", a, b);
                }
            }
            other => prop_assert!(false, "expected a cycle, got {:?}", other),
        }
    }
}

#[test]
fn fixed_cycles() {
    let two = vec![vec![1], vec![0]];
    assert!(matches!(topological_order(&set_from(&two)), Err(StatementError::Cycle(w)) if w.len() == 2));
    let three = vec![vec![2], vec![0], vec![1], vec![]];
    assert!(matches!(topological_order(&set_from(&three)), Err(StatementError::Cycle(w)) if w.len() == 3));
}
