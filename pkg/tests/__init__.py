# Tests for the certificate laboratory
