//! Every example runs to completion.

macro_rules! example {
    ($name:ident) => {
        mod $name {
            include!(concat!("../examples/", stringify!($name), ".rs"));
        }

        #[test]
        fn $name() {
            $name::run_example().unwrap();
        }
    };
}

example!(simulate_mpp);
example!(scenario_tree);
example!(snell_envelope);
example!(reflected_solve);
example!(optimal_stopping);
example!(picard_contraction);
example!(weighted_norms);
example!(run_config);
