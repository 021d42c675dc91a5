"""Published benchmark numbers used as statistical-test fixtures.

Per-class F1 scores (10 fault classes) reported for the reference graph
model and five sequence baselines on the same bearing dataset, plus the
published paired-t comparison values and the three repeated-run F1 vectors
for the 3 Hp load condition.
"""

PER_CLASS_F1 = {
    "proposed": [1.00, 1.00, 0.99, 0.99, 1.00, 1.00, 1.00, 0.98, 0.99, 1.00],
    "cnn":      [0.84, 0.86, 0.93, 1.00, 1.00, 0.97, 0.98, 1.00, 0.82, 1.00],
    "lstm":     [0.95, 0.94, 0.88, 1.00, 1.00, 0.97, 0.97, 1.00, 0.71, 0.98],
    "rnn":      [0.93, 0.94, 0.94, 1.00, 1.00, 0.98, 0.97, 1.00, 0.92, 1.00],
    "gru":      [0.91, 0.94, 0.94, 1.00, 1.00, 0.98, 0.97, 1.00, 0.83, 1.00],
    "bilstm":   [0.95, 0.94, 0.89, 1.00, 1.00, 0.97, 0.97, 1.00, 0.71, 1.00],
}

# published paired-t results (proposed vs baseline): mean diff, t, one-sided p
PUBLISHED_PAIRED_T = {
    "cnn":    {"mean_diff": 0.055, "t": 2.356, "p": 0.021},
    "lstm":   {"mean_diff": 0.055, "t": 2.006, "p": 0.038},
    "rnn":    {"mean_diff": 0.027, "t": 2.547, "p": 0.016},
    "gru":    {"mean_diff": 0.038, "t": 2.201, "p": 0.028},
    "bilstm": {"mean_diff": 0.052, "t": 1.819, "p": 0.051},
}

# three repeated evaluation runs on the 3 Hp load; published summary 0.995
THREE_HP_RUNS = [
    [1.00, 1.00, 1.00, 0.99, 1.00, 1.00, 0.99, 0.98, 1.00, 1.00],
    [1.00, 1.00, 0.98, 0.98, 1.00, 1.00, 1.00, 0.98, 0.98, 1.00],
    [1.00, 1.00, 1.00, 0.99, 1.00, 1.00, 1.00, 0.97, 1.00, 1.00],
]
