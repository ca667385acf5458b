from export_presets import export_presets


def main():
    single_core = dict(
        name="ivybridge-1core",
        peak_gflops=28.32,
        bandwidth_gbs=59.7,
        **{"lambda": 0.7},
        channel_factor=4,
        cores=1,
    )
    ten_cores = dict(
        name="ivybridge-10core",
        peak_gflops=24.8,
        bandwidth_gbs=59.7,
        **{"lambda": 0.7},
        channel_factor=1,
        cores=10,
    )

    header_lines = {
        "ivybridge-1core": [
            "Intel Xeon E5-2680 v2 (Ivy Bridge), one core at 3.54 GHz.",
            "Bandwidth is shared by four channels; a single core sees a quarter of it.",
        ],
        "ivybridge-10core": ["Intel Xeon E5-2680 v2 (Ivy Bridge), ten cores at 3.10 GHz."],
    }

    export_presets([single_core, ten_cores], header_lines=header_lines)


if __name__ == "__main__":
    main()
