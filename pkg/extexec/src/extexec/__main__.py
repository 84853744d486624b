from extexec.worker import main

main()
