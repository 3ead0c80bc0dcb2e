"""Tour of the model core: build, initialize, train, evaluate.

Runs in a couple of seconds and prints what happens at each step.
"""

import numpy as np

from fedsim import (
    ModelSpec,
    TrainConfig,
    evaluate,
    forward,
    init_params,
    loss_and_grad,
    make_synthetic,
    train_local,
)


def main():
    # Two Gaussian blobs, far enough apart that a linear model separates them.
    train = make_synthetic([[-2.0, -2.0], [2.0, 2.0]], 1.0, (400, 400), seed=1)
    test = make_synthetic([[-2.0, -2.0], [2.0, 2.0]], 1.0, (200, 200), seed=2)

    for spec in (
        ModelSpec("logistic-regression", input_dim=2),
        ModelSpec("mlp-1hidden", input_dim=2, hidden_dim=8),
    ):
        print(f"\n=== {spec.kind} ({spec.param_count} parameters) ===")
        params = init_params(spec, seed=42)
        print("fresh model on test data:", evaluate(spec, params, test))

        # sanity: analytic gradient against a one-coordinate finite difference
        X, y = train.features[:64], train.labels[:64]
        loss, grad = loss_and_grad(spec, params, X, y)
        eps = 1e-6
        bumped = params.values.copy()
        bumped[0] += eps
        fd0 = (loss_and_grad(spec, params.with_values(bumped), X, y)[0] - loss) / eps
        print(f"batch loss {loss:.4f}; d/dw0 analytic {grad.values[0]:+.6f} "
              f"vs finite-diff {fd0:+.6f}")

        fitted, epochs = train_local(
            spec, params, train, TrainConfig(epochs=15, batch_size=32, learning_rate=0.3)
        )
        print(f"after {epochs} epochs:", evaluate(spec, fitted, test))
        probs = forward(spec, fitted, test.features[:5])
        print("first five test probabilities:", np.round(probs, 3))


if __name__ == "__main__":
    main()
