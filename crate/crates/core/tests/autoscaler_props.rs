use proptest::prelude::*;
use vmscale::autoscaler::{autoscale, kmeans, map_cluster_to_vm, nearest, AutoscaleOptions, TaskDemand, VmCatalog};
use vmscale::{Error, Resources};

fn points() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.0..1.0f64, 2), 1..80)
}

fn demands() -> impl Strategy<Value = Vec<Resources>> {
    prop::collection::vec((0.0..2000.0f64, 0.0..3.0f64).prop_map(|(c, m)| Resources::new(c, m)), 1..60)
}

proptest! {
    #[test]
    fn lloyd_never_increases_wcss(p in points(), k in 1usize..6, seed in any::<u64>()) {
        prop_assume!(k <= p.len());
        let c = kmeans(&p, k, seed, 100).unwrap();
        prop_assert!(c.history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn assignments_are_nearest(p in points(), k in 1usize..6, seed in any::<u64>()) {
        prop_assume!(k <= p.len());
        let c = kmeans(&p, k, seed, 100).unwrap();
        for (x, &a) in p.iter().zip(&c.assignment) {
            let (_, best) = nearest(x, &c.centroids);
            let own: f64 = x.iter().zip(&c.centroids[a]).map(|(u, v)| (u - v).powi(2)).sum();
            prop_assert!(own <= best + 1e-12);
        }
    }

    #[test]
    fn mapped_type_covers_cluster(d in demands()) {
        let catalog = VmCatalog::default();
        let ty = map_cluster_to_vm(&d, &catalog).unwrap();
        let cap = catalog.types[ty].capacity();
        prop_assert!(d.iter().all(|x| x.cpu <= cap.cpu && x.mem <= cap.mem));
    }

    #[test]
    fn oversized_demand_errors(c in 2000.001..5000.0f64) {
        let r = map_cluster_to_vm(&[Resources::new(c, 1.0)], &VmCatalog::default());
        prop_assert!(matches!(r, Err(Error::DemandExceedsLargest)));
    }

    #[test]
    fn autoscale_conserves_and_covers(d in demands(), seed in any::<u64>()) {
        let catalog = VmCatalog::default();
        let tasks: Vec<TaskDemand> = d.iter().enumerate().map(|(i, &x)| TaskDemand::new(format!("t{i}"), x).unwrap()).collect();
        let out = autoscale(&tasks, &catalog, &AutoscaleOptions::default(), seed).unwrap();
        prop_assert_eq!(out.counts.iter().sum::<usize>(), tasks.len());
        for (t, &ty) in tasks.iter().zip(&out.task_types) {
            prop_assert!(t.demand.fits_in(&catalog.types[ty].capacity()));
        }
        prop_assert_eq!(&out, &autoscale(&tasks, &catalog, &AutoscaleOptions::default(), seed).unwrap());
    }
}
